"""Coordinate conversion tests against independently computed fixtures.

The numeric anchors were produced with a 50-digit mpmath evaluation of the
standard WGS-84 forward formula and the ENU rotation, cross-checked against
a published geodesy calculator.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rve.geo import (
    DEFAULT_REFERENCE,
    EcefCoord,
    EnuCoord,
    GeodeticCoord,
    WGS84_A,
    WGS84_B,
    ecef_to_enu,
    ecef_to_geodetic,
    enu_rotation,
    enu_to_ecef,
    geodetic_to_ecef,
)

# mpmath mp.dps=50 evaluation of the forward formula / Eq. rotation
ORACLE_ECEF_28_6 = (857366.6015347462, -5538251.314768379, 3035066.345856742)
ORACLE_ENU_100_200_10 = (857452.1209476464, -5538150.081285701, 3035246.729370407)


class TestGeodeticToEcef:
    def test_equator_prime_meridian_is_semi_major_axis(self):
        p = geodetic_to_ecef(GeodeticCoord(0.0, 0.0, 0.0))
        assert p.x == pytest.approx(WGS84_A, abs=1e-6)
        assert p.y == pytest.approx(0.0, abs=1e-6)
        assert p.z == pytest.approx(0.0, abs=1e-6)

    def test_north_pole_is_semi_minor_axis(self):
        p = geodetic_to_ecef(GeodeticCoord(90.0, 0.0, 0.0))
        assert p.x == pytest.approx(0.0, abs=1e-6)
        assert p.y == pytest.approx(0.0, abs=1e-6)
        assert p.z == pytest.approx(6356752.3142, abs=1e-4)

    def test_against_high_precision_oracle(self):
        p = geodetic_to_ecef(GeodeticCoord(28.6, -81.2, 30.0))
        assert p.x == pytest.approx(ORACLE_ECEF_28_6[0], abs=1e-6)
        assert p.y == pytest.approx(ORACLE_ECEF_28_6[1], abs=1e-6)
        assert p.z == pytest.approx(ORACLE_ECEF_28_6[2], abs=1e-6)


class TestEnuToEcef:
    def test_enu_origin_is_reference_point(self):
        ref = GeodeticCoord(0.0, 0.0, 0.0)
        p = enu_to_ecef(EnuCoord(0.0, 0.0, 0.0), ref)
        assert p.x == pytest.approx(WGS84_A, abs=1e-9)
        assert p.y == pytest.approx(0.0, abs=1e-9)
        assert p.z == pytest.approx(0.0, abs=1e-9)

    def test_up_axis_is_plus_x_at_equator_prime_meridian(self):
        p = enu_to_ecef(EnuCoord(0.0, 0.0, 1.0), GeodeticCoord(0.0, 0.0, 0.0))
        assert p.x == pytest.approx(WGS84_A + 1.0, abs=1e-6)
        assert p.y == pytest.approx(0.0, abs=1e-6)
        assert p.z == pytest.approx(0.0, abs=1e-6)

    def test_against_high_precision_oracle(self):
        p = enu_to_ecef(EnuCoord(100.0, 200.0, 10.0), GeodeticCoord(28.6, -81.2, 30.0))
        assert p.x == pytest.approx(ORACLE_ENU_100_200_10[0], abs=1e-6)
        assert p.y == pytest.approx(ORACLE_ENU_100_200_10[1], abs=1e-6)
        assert p.z == pytest.approx(ORACLE_ENU_100_200_10[2], abs=1e-6)

    def test_zero_offset_matches_forward_conversion_exactly(self):
        for ref in (DEFAULT_REFERENCE, GeodeticCoord(-45.0, 171.0, 1200.0)):
            a = enu_to_ecef(EnuCoord(0.0, 0.0, 0.0), ref)
            b = geodetic_to_ecef(ref)
            assert (a.x, a.y, a.z) == pytest.approx((b.x, b.y, b.z), abs=1e-9)

    def test_round_trip_with_ecef_to_enu(self):
        ref = GeodeticCoord(28.6, -81.2, 30.0)
        enu = EnuCoord(-250.0, 847.5, -12.0)
        back = ecef_to_enu(enu_to_ecef(enu, ref), ref)
        assert (back.e, back.n, back.u) == pytest.approx((enu.e, enu.n, enu.u), abs=1e-7)


class TestEcefToGeodetic:
    def test_inverse_of_equator_point(self):
        g = ecef_to_geodetic(EcefCoord(WGS84_A, 0.0, 0.0))
        assert g.lat == pytest.approx(0.0, abs=1e-9)
        assert g.lon == pytest.approx(0.0, abs=1e-9)
        assert g.height == pytest.approx(0.0, abs=1e-6)

    def test_pole_reports_zero_longitude(self):
        g = ecef_to_geodetic(EcefCoord(0.0, 0.0, 6356752.3142))
        assert g.lat == pytest.approx(90.0, abs=1e-9)
        assert g.lon == 0.0
        assert g.height == pytest.approx(0.0, abs=1e-3)

    def test_earth_center_rejected(self):
        with pytest.raises(ValueError):
            ecef_to_geodetic(EcefCoord(0.0, 0.0, 0.0))

    @given(
        lat=st.floats(-89.0, 89.0),
        lon=st.floats(-179.999, 180.0),
        height=st.floats(-100.0, 10_000.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_round_trip_property(self, lat, lon, height):
        g = GeodeticCoord(lat, lon, height)
        back = ecef_to_geodetic(geodetic_to_ecef(g))
        assert abs(back.lat - g.lat) < 1e-6
        assert abs(back.lon - g.lon) < 1e-6
        assert abs(back.height - g.height) < 1e-3

    def test_round_trip_grid(self):
        for lat in (-89.0, -60.0, -28.5, 0.0, 28.6, 45.0, 89.0):
            for lon in (-179.0, -81.2, 0.0, 99.9, 180.0):
                for h in (-100.0, 0.0, 30.0, 10_000.0):
                    g = GeodeticCoord(lat, lon, h)
                    back = ecef_to_geodetic(geodetic_to_ecef(g))
                    assert abs(back.lat - lat) < 1e-6
                    assert abs(back.lon - lon) < 1e-6
                    assert abs(back.height - h) < 1e-3


class TestRotationMatrix:
    @pytest.mark.parametrize(
        "ref",
        [GeodeticCoord(0.0, 0.0, 0.0), GeodeticCoord(28.6, -81.2, 30.0),
         GeodeticCoord(-67.0, 144.0, 500.0)],
    )
    def test_orthonormal(self, ref):
        r = enu_rotation(ref)
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12

    def test_matrix_matches_scalar_path(self):
        ref = GeodeticCoord(28.6, -81.2, 30.0)
        enu = np.array([100.0, 200.0, 10.0])
        base = geodetic_to_ecef(ref)
        via_matrix = enu_rotation(ref) @ enu + np.array([base.x, base.y, base.z])
        p = enu_to_ecef(EnuCoord(*enu), ref)
        assert (p.x, p.y, p.z) == pytest.approx(tuple(via_matrix), abs=1e-9)


class TestValidation:
    def test_latitude_bounds_enforced(self):
        with pytest.raises(ValueError):
            GeodeticCoord(91.0, 0.0, 0.0)

    def test_longitude_normalized_half_open(self):
        assert GeodeticCoord(0.0, -180.0, 0.0).lon == 180.0
        assert GeodeticCoord(0.0, 270.0, 0.0).lon == -90.0
        assert GeodeticCoord(0.0, 180.0, 0.0).lon == 180.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            GeodeticCoord(math.nan, 0.0, 0.0)
        with pytest.raises(ValueError):
            EcefCoord(math.inf, 0.0, 0.0)
