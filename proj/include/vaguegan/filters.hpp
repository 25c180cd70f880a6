#pragma once

#include <span>

namespace vaguegan {

// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]] over one H x W plane with
// replicate padding. `out` must not alias `in`.
void laplacian_plane(std::span<const double> in, int height, int width,
                     std::span<double> out);

// Adjoint of laplacian_plane: accumulates L^T * grad_out into grad_in.
void laplacian_plane_adjoint(std::span<const double> grad_out, int height,
                             int width, std::span<double> grad_in);

}  // namespace vaguegan
