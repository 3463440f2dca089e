import pytest
from pydantic import ValidationError

from hyperlab.core.errors import ConfigError
from hyperlab.schemas import (
    DomainShape,
    DomainSpec,
    EnsembleSpec,
    EntryLaw,
    GridSpec,
    RegimeSpec,
    RunConfig,
)


@pytest.mark.parametrize("raw,expected", [([0.1, -0.2], 0.1 - 0.2j), (0.5, 0.5 + 0j), ("0.3+0.1j", 0.3 + 0.1j)])
def test_complex_inputs(raw, expected):
    grids = GridSpec(z=[raw])
    assert grids.z[0] == expected


def test_complex_serializes_as_pair():
    dumped = GridSpec(w=[0.2 + 0.5j]).model_dump(mode="json")
    assert dumped["w"] == [[0.2, 0.5]]


def test_regime_defaults_scale_with_N():
    eta_L, eta_0, eta_c, T = RegimeSpec().resolve(16)
    assert eta_L == pytest.approx(16.0 ** -10)
    assert eta_0 == pytest.approx(16.0 ** -1.05)
    assert eta_c == pytest.approx(16.0 ** -0.9)
    assert T == pytest.approx(16.0 ** 3)


def test_regime_order_is_enforced():
    with pytest.raises(ValidationError):
        RegimeSpec(eta_0=0.1, eta_c=0.01)
    # a single explicit value can still clash with the N-dependent defaults
    with pytest.raises(ConfigError):
        RegimeSpec(eta_0=0.5).resolve(16)


def test_custom_law_needs_fourth_moment():
    with pytest.raises(ValidationError):
        EnsembleSpec(entry_law=EntryLaw.CUSTOM)
    assert EnsembleSpec(entry_law=EntryLaw.CUSTOM, mu4=2.5).mu4 == 2.5


def test_ensemble_bounds():
    with pytest.raises(ValidationError):
        EnsembleSpec(N=0)
    with pytest.raises(ValidationError):
        EnsembleSpec(seed=2 ** 64)
    assert EnsembleSpec(N=8).with_N(32).N == 32


def test_annulus_needs_ordered_radii():
    with pytest.raises(ValidationError):
        DomainSpec(shape=DomainShape.ANNULUS_SECTOR, r_inner=0.6, r_outer=0.2)
    with pytest.raises(ValidationError):
        DomainSpec(alpha=0.5)


def test_run_config_guards():
    with pytest.raises(ValidationError):
        RunConfig(grids={"z": [0.97]})
    with pytest.raises(ValidationError):
        RunConfig(grids={"w": [0.5]})
    with pytest.raises(ValidationError):
        RunConfig(grids={"N": [64, 32]})
    with pytest.raises(ValidationError):
        RunConfig(unknown_key=1)
    assert RunConfig(z_max=0.99, grids={"z": [0.97]}).grids.z == [0.97 + 0j]


def test_base_seed_prefers_top_level():
    assert RunConfig(ensemble={"seed": 5}).base_seed == 5
    assert RunConfig(ensemble={"seed": 5}, seed=11).base_seed == 11
