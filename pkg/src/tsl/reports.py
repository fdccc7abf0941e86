"""Margin reports shared by the dynamics and diagnostics checkers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MarginTrack:
    """Per-time (or per-pair) margins RHS - LHS for one inequality display."""

    name: str
    margins: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        """Tolerance scale: unit-normalized, grown with the RHS magnitude."""
        return float(max(1.0, np.max(np.abs(self.rhs)) if self.rhs.size else 0.0))

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else 0.0


@dataclass
class BoundReport:
    """Named family of margin tracks with a single pass/fail verdict.

    The verdict is min margin >= -tolerance * scale on every track, where the
    scale is max(1, sup |RHS|) of the track.  Tracks whose LHS is only a
    lower bound (meta key ``lower_bound_lhs``) keep falsification-only
    semantics: a negative margin disproves the inequality, a nonnegative one
    certifies nothing.
    """

    family: str
    params: dict
    tracks: list
    tolerance: float = 1e-8
    extras: dict = field(default_factory=dict)
    verdict_override: bool | None = None

    def track(self, name: str) -> MarginTrack:
        for t in self.tracks:
            if t.name == name:
                return t
        raise KeyError(f"no track named {name!r} in report {self.family!r}")

    @property
    def min_margin(self) -> float:
        return min((t.min_margin for t in self.tracks), default=0.0)

    @property
    def verdict(self) -> bool:
        if self.verdict_override is not None:
            return self.verdict_override
        return all(t.min_margin >= -self.tolerance * t.scale for t in self.tracks)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            if isinstance(v, float) and not np.isfinite(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        payload = {
            "family": self.family,
            "parameters": clean(self.params),
            "tolerance": self.tolerance,
            "verdict": bool(self.verdict),
            "tracks": [
                {
                    "name": t.name,
                    "margins": t.margins.tolist(),
                    "lhs": t.lhs.tolist(),
                    "rhs": t.rhs.tolist(),
                    "meta": clean(t.meta),
                    "min_margin": t.min_margin,
                }
                for t in self.tracks
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BoundReport":
        d = json.loads(text)
        tracks = [
            MarginTrack(
                name=t["name"],
                margins=np.asarray(t["margins"], dtype=np.float64),
                lhs=np.asarray(t["lhs"], dtype=np.float64),
                rhs=np.asarray(t["rhs"], dtype=np.float64),
                meta=t.get("meta", {}),
            )
            for t in d["tracks"]
        ]
        return cls(family=d["family"], params=d["parameters"], tracks=tracks,
                   tolerance=d["tolerance"], verdict_override=bool(d["verdict"]))
