import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from redshiftai.config import (
    ConfigError,
    apply_override,
    from_document,
    load_schema,
    normalize,
    parse_config,
)
from redshiftai.model import InvalidParameterError, build_redshift_geometry
from redshiftai.phase import total_phase_perturbative


def test_empty_document_gives_strontium_defaults():
    cfg = parse_config("{}")
    assert cfg.units_mode == "physical"
    assert cfg.species.Omega == pytest.approx(2 * math.pi * 429e12, rel=1e-15)
    geo = cfg.parametric
    assert geo["k"] == pytest.approx(8 * 4 * math.pi / 813e-9, rel=1e-15)
    assert (geo["T1"], geo["T"]) == (0.25, 0.5)
    assert cfg.noise.atom_flux == 1e5 and cfg.noise.vibration_accel == 5e-10
    assert cfg.campaign.T_values == (0.4, 0.6)
    assert cfg.sequence == build_redshift_geometry(0.25, 0.5, geo["k"])


def test_scaled_units_defaults():
    cfg = from_document({"constants": {"units": "scaled"}})
    assert (cfg.constants.c, cfg.constants.hbar, cfg.constants.g) == (10.0, 1.0, 1.0)
    assert cfg.constants.scaled_units and cfg.units_mode == "scaled"


def test_negative_T1_is_range_error():
    with pytest.raises(InvalidParameterError):
        from_document({"geometry": {"T1": -0.25}})


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"bogus": 1}, ""),
        ({"noise": {"atom_flux": "many"}}, "noise.atom_flux"),
        ({"campaign": {"seed": -1}}, "campaign.seed"),
        ({"constants": {"units": "imperial"}}, "constants.units"),
        ({"schema_version": 2}, "schema_version"),
    ],
)
def test_schema_violations_name_the_path(doc, path):
    with pytest.raises(ConfigError) as exc:
        from_document(doc)
    assert exc.value.path == path


def test_unknown_geometry_key_rejected():
    with pytest.raises(ConfigError) as exc:
        from_document({"geometry": {"T1": 0.25, "Tx": 1}})
    assert exc.value.path.startswith("geometry")


def test_invalid_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_explicit_pulse_list_matches_parametric():
    cfg = parse_config("{}")
    seq = cfg.sequence
    doc = {
        "geometry": {
            "pulses": [
                {"t": p.t, "k_upper": p.k_upper, "k_lower": p.k_lower, "lambda_after": int(p.lambda_after)}
                for p in seq.pulses
            ],
            "lambda0": int(seq.lambda0),
        }
    }
    explicit = from_document(doc)
    assert explicit.parametric is None
    a = total_phase_perturbative(cfg.sequence, cfg.species, cfg.constants)
    b = total_phase_perturbative(explicit.sequence, explicit.species, explicit.constants)
    assert (a.ref_phase, a.clock_phase) == (b.ref_phase, b.clock_phase)
    with pytest.raises(ConfigError):
        explicit.plan("montecarlo")


def test_schema_is_published_and_versioned():
    schema = load_schema()
    assert schema["properties"]["schema_version"] == {"const": 1}
    assert schema["additionalProperties"] is False


docs = st.fixed_dictionaries(
    {},
    optional={
        "geometry": st.fixed_dictionaries(
            {}, optional={"T1": st.floats(0.05, 1.0), "T": st.floats(0.05, 1.0), "inverted": st.booleans()}
        ),
        "violation": st.fixed_dictionaries({}, optional={"beta_plus": st.floats(-1e-3, 1e-3)}),
        "campaign": st.fixed_dictionaries({}, optional={"seed": st.integers(0, 2**32)}),
        "constants": st.fixed_dictionaries({}, optional={"units": st.sampled_from(["physical", "scaled"])}),
    },
)


@given(docs)
def test_normalisation_idempotent(doc):
    once = from_document(doc).to_dict()
    twice = from_document(json.loads(json.dumps(once))).to_dict()
    assert once == twice
    assert normalize(once) == once


def test_overrides():
    doc = apply_override({}, "geometry.T=0.6")
    doc = apply_override(doc, "noise.interleaved=false")
    doc = apply_override(doc, 'constants.units="scaled"')
    assert doc == {"geometry": {"T": 0.6}, "noise": {"interleaved": False}, "constants": {"units": "scaled"}}
    assert apply_override({}, "constants.units=scaled") == {"constants": {"units": "scaled"}}
    for bad in ("geometry.T", "=1"):
        with pytest.raises(ConfigError):
            apply_override({}, bad)
    with pytest.raises(ConfigError):
        apply_override({"geometry": 1}, "geometry.T=1")
