"""Mode bookkeeping for the four-mode twin-beam field.

The field is described by four bosonic modes: the upper and lower sidebands
(at carrier detunings +Omega and -Omega) of each of the two bright beams,
called "probe" and "conjugate".  Quadratures are ordered (p, q) within each
mode, so an N-mode covariance matrix is 2N x 2N.

Two canonical mode orderings are used throughout:

* ``sideband``:   probe_upper, probe_lower, conjugate_upper, conjugate_lower
* ``sym_asym``:   probe_sym, probe_asym, conjugate_sym, conjugate_asym

where sym/asym are the balanced (+/-) combinations of the upper and lower
sideband operators of one beam.
"""

from __future__ import annotations

from dataclasses import dataclass

BEAMS = ("probe", "conjugate")
SIDEBAND_PARTS = ("upper", "lower")
SYM_ASYM_PARTS = ("sym", "asym")


@dataclass(frozen=True)
class ModeLabel:
    """Identity of one bosonic mode: which beam, and which component."""

    beam: str
    part: str

    def __post_init__(self) -> None:
        if self.beam not in BEAMS:
            raise ValueError(f"unknown beam {self.beam!r}; expected one of {BEAMS}")
        if self.part not in SIDEBAND_PARTS + SYM_ASYM_PARTS:
            raise ValueError(
                f"unknown mode part {self.part!r}; expected one of "
                f"{SIDEBAND_PARTS + SYM_ASYM_PARTS}"
            )

    @property
    def token(self) -> str:
        return f"{self.beam}_{self.part}"

    @classmethod
    def parse(cls, token: str) -> "ModeLabel":
        beam, _, part = token.partition("_")
        return cls(beam, part)

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.token


SIDEBAND_ORDER = tuple(
    ModeLabel(beam, part) for beam in BEAMS for part in SIDEBAND_PARTS
)
SYM_ASYM_ORDER = tuple(
    ModeLabel(beam, part) for beam in BEAMS for part in SYM_ASYM_PARTS
)


def mode_index(order: tuple[ModeLabel, ...], label: ModeLabel) -> int:
    """Position of ``label`` within ``order`` (raises if absent)."""
    try:
        return order.index(label)
    except ValueError:
        raise ValueError(f"mode {label.token} not in order {[m.token for m in order]}")


def quad_indices(mode: int) -> tuple[int, int]:
    """Row/column indices of the (p, q) quadratures of mode ``mode``."""
    return 2 * mode, 2 * mode + 1
