"""Binary snapshot files.

Layout: ASCII ``key=value`` header lines, a blank line, then the cosine
coefficients as little-endian float64 with the first index varying fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructureError
from .spectral import Domain, SpectralField

MAGIC = "chhs-snapshot"
VERSION = 1


@dataclass(eq=False)
class Snapshot:
    domain: Domain
    coeffs: np.ndarray
    time: float
    step: int = 0
    dt: float = 0.0
    streak: int = 0

    @property
    def mean(self) -> float:
        return float(self.coeffs[(0,) * self.domain.dim]) / math.sqrt(self.domain.volume)

    def field(self) -> SpectralField:
        return SpectralField(self.domain, np.array(self.coeffs))

    def header_lines(self) -> list[str]:
        d = self.domain
        return [
            MAGIC,
            f"version={VERSION}",
            f"dim={d.dim}",
            "modes=" + " ".join(str(n) for n in d.modes),
            "extents=" + " ".join(repr(v) for v in d.extents),
            f"epsilon={d.epsilon!r}",
            f"gamma={d.gamma!r}",
            f"time={float(self.time)!r}",
            f"mean={self.mean!r}",
            f"step={int(self.step)}",
            f"dt={float(self.dt)!r}",
            f"streak={int(self.streak)}",
        ]

    def to_bytes(self) -> bytes:
        header = "\n".join(self.header_lines()) + "\n\n"
        payload = np.asarray(self.coeffs, dtype="<f8").ravel(order="F").tobytes()
        return header.encode("ascii") + payload

    def save(self, path) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "Snapshot":
        sep = data.find(b"\n\n")
        if sep < 0:
            raise StructureError("snapshot header is not terminated by a blank line")
        lines = data[:sep].decode("ascii").split("\n")
        payload = data[sep + 2:]
        if not lines or lines[0] != MAGIC:
            raise StructureError("not a chhs snapshot")
        header = {}
        for line in lines[1:]:
            key, eq, value = line.partition("=")
            if not eq:
                raise StructureError(f"malformed header line {line!r}")
            header[key] = value
        if "version" not in header:
            raise StructureError("snapshot header lacks a version")
        if int(header["version"]) != VERSION:
            raise StructureError(f"unsupported snapshot version {header['version']}")
        try:
            dim = int(header["dim"])
            modes = tuple(int(v) for v in header["modes"].split())
            extents = tuple(float(v) for v in header["extents"].split())
            domain = Domain(extents, modes, float(header["epsilon"]), float(header["gamma"]))
            time = float(header["time"])
            mean = float(header["mean"])
        except KeyError as exc:
            raise StructureError(f"snapshot header lacks {exc.args[0]!r}") from None
        if domain.dim != dim:
            raise StructureError("dim disagrees with modes/extents")
        count = int(np.prod(modes))
        if len(payload) != 8 * count:
            raise StructureError(f"payload holds {len(payload)} bytes, expected {8 * count}")
        coeffs = np.frombuffer(payload, dtype="<f8").reshape(modes, order="F").astype(float)
        snap = cls(domain, coeffs, time, int(header.get("step", 0)),
                   float(header.get("dt", 0.0)), int(header.get("streak", 0)))
        if abs(snap.mean - mean) > 1e-12 * (1.0 + abs(mean)):
            raise StructureError("stored mean disagrees with the payload")
        return snap

    @classmethod
    def load(cls, path) -> "Snapshot":
        return cls.from_bytes(Path(path).read_bytes())


def save_state(path, state, step: int = 0, dt: float = 0.0, streak: int = 0) -> Path:
    return Snapshot(state.phi.domain, np.asarray(state.phi.coeffs), state.time, step, dt, streak).save(path)
