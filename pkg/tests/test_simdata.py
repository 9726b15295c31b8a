import json

import numpy as np
import pytest

from igpk.errors import ConfigError, DomainError
from igpk.io import read_csv, read_locations, read_model, read_observations, write_csv, write_json
from igpk.simdata import (
    VARIANTS,
    DemoConfig1D,
    SwotConfig,
    config_echo,
    demo_models,
    export_dataset,
    make_demo_1d,
    make_swot,
    swot_error_factor,
    swot_grid,
    swot_track,
)
from igpk.variogram import Brownian, ConvolvedBrownian

SMALL = dict(nx=8, ny=8, n_track=20)


class TestDemo1D:
    def test_deterministic(self):
        a, b = make_demo_1d(), make_demo_1d()
        np.testing.assert_array_equal(a.obs.y, b.obs.y)
        np.testing.assert_array_equal(a.obs.locs, b.obs.locs)
        assert not np.array_equal(a.obs.y, make_demo_1d(DemoConfig1D(seed=1)).obs.y)

    def test_layout(self):
        d = make_demo_1d()
        s = d.obs.locs[:, 0]
        assert d.obs.n == 7
        assert np.all(np.diff(s) > 0) and s.min() > 0 and s.max() < 1
        assert 0.0 in d.lattice
        assert d.lattice[0] == pytest.approx(-9.0) and d.lattice[-1] == pytest.approx(10.0)
        assert set(d.models) == set(VARIANTS)

    def test_calibration(self):
        cfg = DemoConfig1D()
        ms = demo_models(cfg)
        for kind in ("rough", "smooth"):
            a = ms[f"{kind}_intrinsic"].of_distance(cfg.calib_h)
            b = ms[f"{kind}_stationary"].of_distance(cfg.calib_h)
            assert abs(a - b) <= 1e-10
        assert isinstance(ms["rough_intrinsic"], Brownian)
        assert isinstance(ms["smooth_intrinsic"], ConvolvedBrownian)

    @pytest.mark.parametrize("kw", [dict(n_obs=1), dict(lattice_lo=0.5), dict(lattice_step=0.0)])
    def test_config_errors(self, kw):
        with pytest.raises(ConfigError):
            DemoConfig1D(**kw)


class TestSwot:
    def test_grid(self):
        g = swot_grid(SwotConfig(**SMALL))
        assert g.shape == (64, 2)
        np.testing.assert_allclose(g[:2], [[32.0, 32.0], [96.0, 32.0]])

    def test_track_geometry(self):
        cfg = SwotConfig(**SMALL)
        pts, line = swot_track(cfg)
        assert pts.shape == (40, 2)
        a, b = pts[line[:, 0] == 0], pts[line[:, 0] == 1]
        # parallel lines a fixed distance apart
        np.testing.assert_allclose(np.linalg.norm(b - a, axis=1), cfg.track_sep, rtol=1e-12)
        step = np.linalg.norm(np.diff(a, axis=0), axis=1)
        np.testing.assert_allclose(step, step[0], rtol=1e-12)

    def test_track_outside_region(self):
        with pytest.raises(DomainError):
            swot_track(SwotConfig(track_sep=900.0, **SMALL))

    def test_noise_free_obs_equal_truth(self):
        d = make_swot(SwotConfig(sigma=0.0, **SMALL))
        np.testing.assert_array_equal(d.obs.y, d.truth_track)
        assert d.om.sigma == 0.0

    def test_deterministic(self):
        a, b = make_swot(SwotConfig(**SMALL)), make_swot(SwotConfig(**SMALL))
        np.testing.assert_array_equal(a.obs.y, b.obs.y)
        np.testing.assert_array_equal(a.truth_grid, b.truth_grid)

    def test_error_factor_variance(self):
        cfg = SwotConfig(**SMALL)
        _, line = swot_track(cfg)
        F = swot_error_factor(cfg, line)
        # rows of K have unit norm: per-point variance sigma_w^2 + sigma_c^2
        np.testing.assert_allclose(np.sum(F**2, axis=1), cfg.sigma_w**2 + cfg.sigma_c**2, rtol=1e-12)
        V = np.random.default_rng(0).standard_normal((F.shape[1], 20000))
        E = F @ V
        np.testing.assert_allclose(E.var(axis=1).mean(), cfg.sigma_w**2 + cfg.sigma_c**2, rtol=0.05)
        # errors on different lines are uncorrelated
        assert np.all((F @ F.T)[np.ix_(line[:, 0] == 0, line[:, 0] == 1)] == 0)

    def test_truth_anchored(self):
        d = make_swot(SwotConfig(**SMALL))
        assert d.gamma_joint.shape == (104, 104)
        np.testing.assert_array_equal(d.anchor, [0.0, 0.0])
        assert np.all(np.isfinite(d.truth_grid))
        assert make_swot(SwotConfig(**SMALL), keep_gamma=False).gamma_joint is None

    def test_config_echo(self):
        echo = config_echo(SwotConfig())
        assert echo["sigma2_z"] == 8e-5 and echo["r"] == 50.0
        assert echo["region"] == [0.0, 512.0, 0.0, 512.0]
        json.dumps(echo)

    @pytest.mark.parametrize("kw", [dict(nx=0), dict(r=0.0), dict(sigma=-1.0), dict(region=(0, 0, 0, 1))])
    def test_config_errors(self, kw):
        with pytest.raises(ConfigError):
            SwotConfig(**kw)

    def test_export(self, tmp_path):
        d = make_swot(SwotConfig(**SMALL))
        export_dataset(d, tmp_path)
        _, locs = read_locations(tmp_path / "locations.csv")
        np.testing.assert_array_equal(locs, d.track)
        header, obs = read_csv(tmp_path / "observations.csv")
        assert header == ["index", "y"]
        np.testing.assert_array_equal(obs[:, 1], d.obs.y)
        assert json.loads((tmp_path / "config.json").read_text())["nx"] == 8


class TestIO:
    def test_round_trip_exact(self, tmp_path):
        rows = np.random.default_rng(0).standard_normal((5, 3))
        write_csv(tmp_path / "a.csv", ["x", "y", "value"], rows)
        names, locs, vals = read_observations(tmp_path / "a.csv")
        assert names == ["x", "y"]
        np.testing.assert_array_equal(locs, rows[:, :2])
        np.testing.assert_array_equal(vals, rows[:, 2])
        assert b"\r" not in (tmp_path / "a.csv").read_bytes()

    def test_prefix_and_int_columns(self, tmp_path):
        write_csv(tmp_path / "b.csv", ["name", "k", "v"], [[1, 0.5], [2, 0.25]],
                  int_cols=(0,), prefix_cols=[["a"], ["b"]])
        assert (tmp_path / "b.csv").read_text() == "name,k,v\na,1,0.5\nb,2,0.25\n"

    @pytest.mark.parametrize("text", ["", "x,y\n1,abc\n", "x,y\n1,2,3\n"])
    def test_bad_csv(self, tmp_path, text):
        p = tmp_path / "c.csv"
        p.write_text(text)
        with pytest.raises(ConfigError):
            read_csv(p)

    def test_missing_value_column(self, tmp_path):
        write_csv(tmp_path / "d.csv", ["x"], [[1.0]])
        with pytest.raises(ConfigError):
            read_observations(tmp_path / "d.csv")

    def test_model_json(self, tmp_path):
        write_json(tmp_path / "m.json", Brownian(2.0).to_dict())
        assert read_model(tmp_path / "m.json") == Brownian(2.0)
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            read_model(tmp_path / "bad.json")
        with pytest.raises(ConfigError):
            read_model(tmp_path / "missing.json")
