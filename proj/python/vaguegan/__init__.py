"""Python bindings for the vaguegan core library."""

from ._vaguegan import (
    LATENT_DIM,
    FEATURE_DIM,
    POISON_LATENT_DIM,
    VagueGanError,
    ParamSet,
    init_params,
    zero_params,
    load_image,
    to_gan_input,
    from_gan_output,
    canny_edge_map,
    laplacian_edge_map,
    generator_forward,
    discriminator_forward,
    poisoner_forward,
    apply_perturbation,
    maybe_poison,
    stealth_mse,
    total_variation,
    laplacian_energy,
    inject_trigger,
    spectral_scores,
    flag_outliers,
    detection_metrics,
    backdoor_proxy,
    frequency_report,
    default_config,
    config_hash,
    load_checkpoint,
    run_cli,
)

__all__ = [name for name in dir() if not name.startswith("_")]
