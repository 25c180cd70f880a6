#include "vaguegan/cli.hpp"

int main(int argc, char** argv) { return vaguegan::cli::run(argc, argv); }
