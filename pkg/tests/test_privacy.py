"""Grid snapping for sensitive-species locations and role-based visibility."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photocensus.errors import ConfigError
from photocensus.privacy import (
    ADMIN,
    PUBLIC,
    RESEARCHER,
    PolicyTable,
    SensitivePolicy,
    obfuscate_location,
)

POLICY = SensitivePolicy(species="grevys_zebra")


class TestObfuscateLocation:
    def test_snaps_to_the_nearest_tenth(self):
        assert obfuscate_location(1.2345, 36.7891, POLICY) == (1.2, 36.8)

    def test_snapped_input_is_unchanged(self):
        assert obfuscate_location(1.2, 36.8, POLICY) == (1.2, 36.8)

    def test_ties_round_away_from_zero(self):
        assert obfuscate_location(-1.25, 36.75, POLICY) == (-1.3, 36.8)
        assert obfuscate_location(1.25, -36.75, POLICY) == (1.3, -36.8)

    def test_binary_float_ties_do_not_misround(self):
        # 36.75 / 0.1 is 367.49999999999994 in IEEE doubles; decimal snapping
        # must still treat it as the exact tie 367.5
        lat, lon = obfuscate_location(0.0, 36.75, POLICY)
        assert lon == 36.8

    def test_coarser_grids(self):
        policy = SensitivePolicy(species="x", grid_degrees=0.5)
        assert obfuscate_location(1.24, 36.76, policy) == (1.0, 37.0)

    @settings(deadline=None, max_examples=300)
    @given(
        st.floats(-90, 90, allow_nan=False),
        st.floats(-180, 180, allow_nan=False),
        st.sampled_from([0.1, 0.25, 0.5, 1.0]),
    )
    def test_idempotent_and_on_grid(self, lat, lon, grid):
        policy = SensitivePolicy(species="x", grid_degrees=grid)
        slat, slon = obfuscate_location(lat, lon, policy)
        assert obfuscate_location(slat, slon, policy) == (slat, slon)
        for value in (slat, slon):
            steps = value / grid
            assert math.isclose(steps, round(steps), abs_tol=1e-9)
        assert abs(slat - lat) <= grid / 2 + 1e-9
        assert abs(slon - lon) <= grid / 2 + 1e-9


class TestSensitivePolicy:
    def test_grid_must_be_positive(self):
        with pytest.raises(ConfigError):
            SensitivePolicy(species="x", grid_degrees=0.0)

    def test_default_raw_access(self):
        assert POLICY.allows_raw(ADMIN)
        assert POLICY.allows_raw(RESEARCHER)
        assert not POLICY.allows_raw(PUBLIC)

    def test_raw_access_can_be_restricted(self):
        locked = SensitivePolicy(species="x", raw_access_roles=frozenset({ADMIN}))
        assert not locked.allows_raw(RESEARCHER)


class TestPolicyTable:
    TABLE = PolicyTable.from_list([POLICY])

    def test_lookup_by_species(self):
        assert self.TABLE.for_species("grevys_zebra") is POLICY
        assert self.TABLE.for_species("plains_zebra") is None

    def test_public_sees_snapped_sensitive_coordinates(self):
        assert self.TABLE.visible_location("grevys_zebra", 1.2345, 36.7891, PUBLIC) == (1.2, 36.8)

    def test_privileged_roles_see_raw_coordinates(self):
        for role in (ADMIN, RESEARCHER):
            assert self.TABLE.visible_location("grevys_zebra", 1.2345, 36.7891, role) == (
                1.2345,
                36.7891,
            )

    def test_non_sensitive_species_are_raw_for_everyone(self):
        assert self.TABLE.visible_location("plains_zebra", 1.2345, 36.7891, PUBLIC) == (
            1.2345,
            36.7891,
        )
