"""Tolerant extraction of point allocations from free-text responses.

The parser is total: no input raises, every failure becomes a structured
flag on the affected round.  Rounds whose token sum falls outside [95, 105]
or whose components leave [0, 100] are flagged and rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_NUM = r"(\d+(?:\.\d+)?)"

# "I will invest 30 points to asset A and 70 points to asset B"
_STRICT_ASSET = re.compile(
    _NUM + r"\s*points?\s+(?:to|in|on|into|for)\s+asset\s*([AB])\b", re.IGNORECASE
)
# "55.5 on A, 44.5 on B" -- asset letters kept case-sensitive so the articles
# "a"/"an" in surrounding prose cannot masquerade as asset mentions
_LOOSE_ASSET = re.compile(
    _NUM + r"\s*(?:points?\s*)?(?:to|in|on|into|for|:|->)?\s*(?:asset\s*)?\b([AB])\b"
)
_ROUND_MARKER = re.compile(r"\bround\s*(\d+)\b", re.IGNORECASE)

SUM_BAND = (95.0, 105.0)
COMPONENT_MAX = 100.0


@dataclass(frozen=True)
class ParsedAllocation:
    round: int
    t_a: float | None
    t_b: float | None
    flags: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.t_a is not None and not self.flags


def _extract_pair(text: str) -> tuple[tuple[float, float] | None, tuple[str, ...]]:
    by_asset: dict[str, float] = {}
    for value, asset in _STRICT_ASSET.findall(text):
        by_asset.setdefault(asset.upper(), float(value))
    if len(by_asset) == 2:
        return (by_asset["A"], by_asset["B"]), ()
    by_asset = {}
    for value, asset in _LOOSE_ASSET.findall(text):
        by_asset.setdefault(asset.upper(), float(value))
    if len(by_asset) == 2:
        return (by_asset["A"], by_asset["B"]), ("loose_format",)
    return None, ("unparseable",)


def _validate(index: int, pair: tuple[float, float], flags: tuple[str, ...]) -> ParsedAllocation:
    t_a, t_b = pair
    if not (0.0 <= t_a <= COMPONENT_MAX and 0.0 <= t_b <= COMPONENT_MAX):
        return ParsedAllocation(index, t_a, t_b, flags + ("token_out_of_range",))
    if not SUM_BAND[0] <= t_a + t_b <= SUM_BAND[1]:
        return ParsedAllocation(index, t_a, t_b, flags + ("sum_out_of_band",))
    if flags:
        return ParsedAllocation(index, t_a, t_b, flags)
    return ParsedAllocation(index, t_a, t_b, ())


def parse_allocations(
    text: str, mode: str = "single", n_rounds: int = 25, round_index: int = 1
) -> list[ParsedAllocation]:
    """Extract allocations from a response.

    ``single`` mode reads one allocation for ``round_index``.  ``multi`` mode
    splits the text at "round k" markers and returns one entry per round
    1..n_rounds, flagging the missing ones.
    """
    text = str(text)
    if mode == "single":
        pair, flags = _extract_pair(text)
        if pair is None:
            return [ParsedAllocation(round_index, None, None, flags)]
        return [_validate(round_index, pair, flags)]

    if mode != "multi":
        return [ParsedAllocation(round_index, None, None, ("unknown_mode",))]

    segments: dict[int, str] = {}
    markers = list(_ROUND_MARKER.finditer(text))
    for pos, marker in enumerate(markers):
        idx = int(marker.group(1))
        end = markers[pos + 1].start() if pos + 1 < len(markers) else len(text)
        if 1 <= idx <= n_rounds and idx not in segments:
            segments[idx] = text[marker.end():end]

    out = []
    for idx in range(1, n_rounds + 1):
        if idx not in segments:
            out.append(ParsedAllocation(idx, None, None, ("missing",)))
            continue
        pair, flags = _extract_pair(segments[idx])
        if pair is None:
            out.append(ParsedAllocation(idx, None, None, flags))
        else:
            out.append(_validate(idx, pair, flags))
    return out
