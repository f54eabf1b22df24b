from pathlib import Path

import pytest

from smx.dataio import load_zone_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "zone_configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_example_zone_configs_validate(path):
    cfg = load_zone_config(path)
    assert cfg.zones
    assert cfg.plausible_names()


def test_synthetic_layout_matches_builtin():
    from smx.synthgen import benchmark_zones

    cfg = load_zone_config(CONFIG_DIR / "synthetic.json")
    assert cfg.zones == benchmark_zones().zones
