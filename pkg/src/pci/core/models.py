"""PCI domain models — enums shared by the numerical core, jobs and CLI."""

from __future__ import annotations

from enum import Enum


class IntegralKind(str, Enum):
    OVERLAP = "overlap"
    INV_R12 = "inv_r12"
    R12 = "r12"
    R12_SQ = "r12_sq"
    R12_CUB = "r12_cub"
    INV_R12_SQ = "inv_r12_sq"
    INV_R12_CUB = "inv_r12_cub"
    R12_R13 = "r12_r13"
    R12_OVER_R13 = "r12_over_r13"
    R12R13_OVER_R23 = "r12r13_over_r23"
    R13SQ_OVER_R12 = "r13sq_over_r12"
    INV_R12_R13 = "inv_r12_r13"
    R12R13_OVER_R14 = "r12r13_over_r14"
    R23R14_OVER_R12 = "r23r14_over_r12"
    R23R12_OVER_R14 = "r23r12_over_r14"
    KINETIC = "kinetic"
    NUCLEAR_ATTRACTION = "nuclear_attraction"

    @property
    def electron_count(self) -> int | None:
        """Fixed number of electrons, or None when the request decides (1–3)."""
        return _ELECTRONS.get(self)

    @property
    def r_power(self) -> int | None:
        """Power of R carried by the value, or None when it depends on l, l′."""
        return _R_POWER.get(self)


_ELECTRONS: dict[IntegralKind, int] = {
    IntegralKind.INV_R12: 2,
    IntegralKind.R12: 2,
    IntegralKind.R12_SQ: 2,
    IntegralKind.R12_CUB: 2,
    IntegralKind.INV_R12_SQ: 2,
    IntegralKind.INV_R12_CUB: 2,
    IntegralKind.R12_R13: 3,
    IntegralKind.R12_OVER_R13: 3,
    IntegralKind.R12R13_OVER_R23: 3,
    IntegralKind.R13SQ_OVER_R12: 3,
    IntegralKind.INV_R12_R13: 3,
    IntegralKind.R12R13_OVER_R14: 4,
    IntegralKind.R23R14_OVER_R12: 4,
    IntegralKind.R23R12_OVER_R14: 4,
}

_R_POWER: dict[IntegralKind, int] = {
    IntegralKind.INV_R12: 5,
    IntegralKind.R12: 7,
    IntegralKind.R12_SQ: 8,
    IntegralKind.R12_CUB: 9,
    IntegralKind.INV_R12_SQ: 4,
    IntegralKind.INV_R12_CUB: 3,
    IntegralKind.R12_R13: 11,
    IntegralKind.R12_OVER_R13: 9,
    IntegralKind.R12R13_OVER_R23: 10,
    IntegralKind.R13SQ_OVER_R12: 10,
    IntegralKind.INV_R12_R13: 7,
    IntegralKind.R12R13_OVER_R14: 13,
    IntegralKind.R23R14_OVER_R12: 13,
    IntegralKind.R23R12_OVER_R14: 13,
}


class OracleMode(str, Enum):
    OFF = "off"
    AUTO = "auto"
    MC = "mc"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped"
