import json

import numpy as np
import pytest

import vaguegan as vg


def scene(side=16, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)


def test_gan_input_range_and_round_trip():
    img = scene(32)
    x = vg.to_gan_input(img, 32)
    assert x.shape == (3, 32, 32)
    assert x.min() >= -1.0 and x.max() <= 1.0
    assert np.array_equal(vg.from_gan_output(x), img)


def test_edge_maps_are_binary_or_bounded():
    img = np.zeros((24, 24, 3), dtype=np.uint8)
    img[:, 12:] = 255
    canny = vg.canny_edge_map(img)
    assert canny.shape == (24, 24)
    assert set(np.unique(canny)) <= {0.0, 1.0}
    assert canny.sum() > 0
    lap = vg.laplacian_edge_map(img)
    assert lap.min() >= 0.0 and lap.max() <= 1.0


def test_networks_shapes():
    side = 16
    x = vg.to_gan_input(scene(side), side)
    g = vg.init_params("generator", 1, side)
    d = vg.init_params("discriminator", 2, side)
    p = vg.init_params("poisoner", 3, side)
    assert g.network == "generator" and g.scalar_count > 0
    out = vg.generator_forward(g, x, np.zeros(vg.LATENT_DIM), np.zeros(vg.FEATURE_DIM))
    assert out.shape == (3, side, side)
    r = vg.discriminator_forward(d, x)
    assert 0.0 < r["prob"] < 1.0
    assert len(r["features"]) == 128
    delta = vg.poisoner_forward(p, x, np.ones(vg.POISON_LATENT_DIM), 0.08)
    assert np.abs(delta).max() <= 0.08 + 1e-12


def test_zero_poisoner_is_identity():
    x = vg.to_gan_input(scene(16), 16)
    p = vg.zero_params("poisoner", 16)
    delta = vg.poisoner_forward(p, x, np.ones(vg.POISON_LATENT_DIM), 0.08)
    assert np.all(delta == 0.0)
    assert np.array_equal(vg.apply_perturbation(x, delta, 0.08), x)


def test_regularizers_hand_values():
    d = np.array([[[0.0, 1.0], [0.0, 1.0]]])
    assert vg.total_variation(d) == pytest.approx(2.0)
    imp = np.zeros((1, 5, 5))
    imp[0, 2, 2] = 1.0
    assert vg.laplacian_energy(imp) == pytest.approx(8.0 / 25.0)
    assert vg.stealth_mse(np.ones((3, 2, 2)), np.zeros((3, 2, 2))) == pytest.approx(1.0)


def test_maybe_poison_extremes():
    x = vg.to_gan_input(scene(8), 8)
    delta = np.full((3, 8, 8), 0.05)
    poisoned, sample = vg.maybe_poison(x, delta, 0.08, 1.0, 7)
    assert poisoned and np.allclose(sample, np.clip(x + delta, -1, 1))
    poisoned, sample = vg.maybe_poison(x, delta, 0.08, 0.0, 7)
    assert not poisoned and np.array_equal(sample, x)


def test_spectral_pipeline_flags_planted_shift():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(200, 16))
    feats[:20, 0] += 10.0
    scores = vg.spectral_scores(feats)
    flags, threshold = vg.flag_outliers(scores, 90.0)
    truth = [i < 20 for i in range(200)]
    m = vg.detection_metrics(flags, truth)
    assert m["precision"] >= 0.9 and m["recall"] >= 0.9
    assert threshold > 0


def test_frequency_report_parseval():
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5, 0.5, size=(3, 16, 16))
    xp = x + rng.uniform(-0.05, 0.05, size=x.shape)
    r = vg.frequency_report(x, xp)
    assert r["total_spectral_energy_diff"] == pytest.approx(((xp - x) ** 2).sum(), rel=1e-9)


def test_backdoor_proxy_blind_generator_is_zero():
    x = vg.to_gan_input(scene(16), 16)
    g = vg.zero_params("generator", 16)
    r = vg.backdoor_proxy(g, x, n_samples=4, seed=0)
    assert r["delta_i"] == pytest.approx(0.0)


def test_errors_are_typed():
    with pytest.raises(vg.VagueGanError):
        vg.init_params("critic", 0, 16)
    with pytest.raises(vg.VagueGanError):
        vg.load_image("/nonexistent/image.png")


def test_cli_train_and_checkpoint(tmp_path):
    cfg = vg.default_config("baseline", "desk")
    cfg.update({"epochs": 2, "image_side": 16, "images": ["synthetic:3"]})
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert vg.run_cli(["--config", str(config_path), "--out", str(out), "train"]) == 0
    ckpts = sorted(out.rglob("final.ckpt"))
    assert ckpts
    c = vg.load_checkpoint(str(ckpts[0]))
    assert c["epoch"] == 2
    assert c["config_hash"] == vg.config_hash(c["config"], "baseline", "desk")
    assert c["generator"].image_side == 16
