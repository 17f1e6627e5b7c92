"""Device vocabulary, token grammar, one-hot encoding and dataset files.

Canonical token grammar, one device per token, single spaces between
tokens::

    BS(a,b) DownConv(c,d) Ref(c) DP(e) OAMHolo(a,-2)

Path pairs are unordered for two-path devices and rendered in alphabetical
order.  The vocabulary maps every concrete device instance to an index;
index 0 is the PAD class used to fill a setup out to the maximum length T,
so the decoder's per-step categorical likelihood is defined at every
position.

Dataset files are line-oriented UTF-8: token string, then optionally a TAB,
the total entanglement S with 6 decimals, a TAB and the 7 Schmidt ranks as
comma-separated integers.  Lines starting with '#' are comments.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .quantum import (Device, N_PATHS, PATH_LETTERS, beam_splitter, dove_prism,
                      down_converter, hologram, mirror)


class ParseError(ValueError):
    """Token text that does not belong to the setup grammar."""

    def __init__(self, message: str, position: int = 0, line: int | None = None):
        self.position = position
        self.line = line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{where}position {position}: {message}")


@dataclass(frozen=True)
class ToolboxConfig:
    """Knobs that fix the device vocabulary and setup shape."""

    holo_shifts: tuple[int, ...] = (-2, -1, 1, 2)
    max_len: int = 12
    dc_order: int = 1

    def __post_init__(self):
        if any(n == 0 for n in self.holo_shifts):
            raise ValueError("hologram shift 0 is excluded from the toolbox")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        if self.dc_order < 0:
            raise ValueError("dc_order must be non-negative")

    def to_json(self) -> str:
        return json.dumps({"holo_shifts": list(self.holo_shifts),
                           "max_len": self.max_len,
                           "dc_order": self.dc_order}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ToolboxConfig":
        raw = json.loads(text)
        return cls(holo_shifts=tuple(raw.get("holo_shifts", (-2, -1, 1, 2))),
                   max_len=int(raw.get("max_len", 12)),
                   dc_order=int(raw.get("dc_order", 1)))

    @classmethod
    def load(cls, path: str | Path) -> "ToolboxConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


class Vocabulary:
    """Bijection between device instances and one-hot indices.

    Index order is deterministic: PAD, then beam splitters over path pairs
    in lexicographic order, down-converters likewise, mirrors per path,
    dove prisms per path, then holograms path-major with the shift
    ascending.  The default toolbox has D = 67 entries including PAD.
    """

    PAD = 0

    def __init__(self, config: ToolboxConfig | None = None):
        self.config = config or ToolboxConfig()
        devices: list[Device | None] = [None]
        for p, q in combinations(range(N_PATHS), 2):
            devices.append(beam_splitter(p, q))
        for p, q in combinations(range(N_PATHS), 2):
            devices.append(down_converter(p, q))
        for p in range(N_PATHS):
            devices.append(mirror(p))
        for p in range(N_PATHS):
            devices.append(dove_prism(p))
        shifts = sorted(self.config.holo_shifts)
        for p in range(N_PATHS):
            for n in shifts:
                devices.append(hologram(p, n))
        self.devices = devices
        self._index = {dev: i for i, dev in enumerate(devices) if dev is not None}

    @property
    def size(self) -> int:
        return len(self.devices)

    @property
    def max_len(self) -> int:
        return self.config.max_len

    def index(self, dev: Device) -> int:
        try:
            return self._index[dev]
        except KeyError:
            raise KeyError(f"device {dev} not in vocabulary") from None

    def device(self, idx: int) -> Device | None:
        return self.devices[idx]

    def tokens(self) -> list[str]:
        return ["<PAD>"] + [render_device(d) for d in self.devices[1:]]

    def digest(self) -> str:
        """Stable hash of the ordered token list (index-assignment check)."""
        blob = "\n".join(self.tokens()).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


Setup = tuple[Device, ...]

_TOKEN_RE = re.compile(r"(BS|DownConv|Ref|DP|OAMHolo)\(([^)]*)\)$")


def render_device(dev: Device) -> str:
    letters = [PATH_LETTERS[p] for p in dev.paths]
    if dev.kind == "BS":
        return f"BS({letters[0]},{letters[1]})"
    if dev.kind == "DC":
        return f"DownConv({letters[0]},{letters[1]})"
    if dev.kind == "REF":
        return f"Ref({letters[0]})"
    if dev.kind == "DP":
        return f"DP({letters[0]})"
    if dev.kind == "HOLO":
        return f"OAMHolo({letters[0]},{dev.shift})"
    raise ValueError(f"unknown device kind {dev.kind!r}")


def render(setup: Setup) -> str:
    return " ".join(render_device(d) for d in setup)


def _parse_token(token: str, pos: int, vocab: Vocabulary | None,
                 line: int | None) -> Device:
    m = _TOKEN_RE.match(token)
    if not m:
        raise ParseError(f"unrecognized token {token!r}", pos, line)
    name, argtext = m.groups()
    args = argtext.split(",")

    def path_arg(s: str) -> int:
        i = PATH_LETTERS.find(s)
        if len(s) != 1 or i < 0:
            raise ParseError(f"bad path {s!r} in {token!r}", pos, line)
        return i

    if name in ("BS", "DownConv"):
        if len(args) != 2:
            raise ParseError(f"{name} takes two paths", pos, line)
        p, q = path_arg(args[0]), path_arg(args[1])
        if p == q:
            raise ParseError(f"{name} paths must differ", pos, line)
        return beam_splitter(p, q) if name == "BS" else down_converter(p, q)
    if name in ("Ref", "DP"):
        if len(args) != 1:
            raise ParseError(f"{name} takes one path", pos, line)
        p = path_arg(args[0])
        return mirror(p) if name == "Ref" else dove_prism(p)
    # OAMHolo
    if len(args) != 2:
        raise ParseError("OAMHolo takes a path and a shift", pos, line)
    p = path_arg(args[0])
    try:
        n = int(args[1])
    except ValueError:
        raise ParseError(f"bad hologram shift {args[1]!r}", pos, line) from None
    if n == 0:
        raise ParseError("hologram shift must be nonzero", pos, line)
    shifts = vocab.config.holo_shifts if vocab is not None else None
    if shifts is not None and n not in shifts:
        raise ParseError(f"hologram shift {n} outside toolbox range {sorted(shifts)}",
                         pos, line)
    return hologram(p, n)


def parse(text: str, vocab: Vocabulary | None = None,
          line: int | None = None) -> Setup:
    """Parse a token string into a device sequence.

    With a vocabulary, hologram shifts are checked against the configured
    range; without one, any nonzero shift is accepted.
    """
    devices = []
    pos = 0
    for token in text.split():
        pos = text.find(token, pos)
        devices.append(_parse_token(token, pos, vocab, line))
        pos += len(token)
    return tuple(devices)


def encode_onehot(setup: Setup, vocab: Vocabulary) -> np.ndarray:
    """Setup as a (T, D) one-hot matrix, PAD-filled beyond the setup length."""
    t_max = vocab.max_len
    if len(setup) > t_max:
        raise ValueError(f"setup length {len(setup)} exceeds T={t_max}")
    x = np.zeros((t_max, vocab.size))
    for t, dev in enumerate(setup):
        x[t, vocab.index(dev)] = 1.0
    for t in range(len(setup), t_max):
        x[t, Vocabulary.PAD] = 1.0
    return x


def decode_onehot(x: np.ndarray, vocab: Vocabulary) -> Setup:
    """Invert :func:`encode_onehot`, validating the one-hot invariants."""
    if x.shape != (vocab.max_len, vocab.size):
        raise ValueError(f"expected shape {(vocab.max_len, vocab.size)}, got {x.shape}")
    devices = []
    seen_pad = False
    for t in range(x.shape[0]):
        col = x[t]
        hot = np.flatnonzero(col == 1.0)
        if len(hot) != 1 or not np.all((col == 0.0) | (col == 1.0)):
            raise ValueError(f"column {t} is not one-hot")
        idx = int(hot[0])
        if idx == Vocabulary.PAD:
            seen_pad = True
        elif seen_pad:
            raise ValueError(f"device column {t} after PAD")
        else:
            devices.append(vocab.devices[idx])
    return tuple(devices)


@dataclass
class SetupRecord:
    """One dataset line: token string plus optional entanglement labels."""

    tokens: str
    s: float | None = None
    srv: tuple[int, ...] | None = None
    entropies: tuple[float, ...] | None = field(default=None, repr=False)

    @property
    def entangled(self) -> bool:
        return bool(self.s) and self.s > 0.0


def format_record(rec: SetupRecord) -> str:
    if rec.s is None:
        return rec.tokens
    line = f"{rec.tokens}\t{rec.s:.6f}"
    if rec.srv is not None:
        line += "\t" + ",".join(str(r) for r in rec.srv)
    return line


def parse_record(line: str, lineno: int, vocab: Vocabulary | None = None) -> SetupRecord:
    parts = line.split("\t")
    if len(parts) > 3:
        raise ParseError("too many fields", 0, lineno)
    tokens = parts[0].strip()
    parse(tokens, vocab, line=lineno)  # validate
    tokens = render(parse(tokens, vocab, line=lineno))  # canonicalize
    s = None
    srv = None
    if len(parts) >= 2:
        try:
            s = float(parts[1])
        except ValueError:
            raise ParseError(f"bad S value {parts[1]!r}", 0, lineno) from None
    if len(parts) == 3:
        try:
            srv = tuple(int(r) for r in parts[2].split(","))
        except ValueError:
            raise ParseError(f"bad SRV {parts[2]!r}", 0, lineno) from None
        if len(srv) != 7:
            raise ParseError("SRV needs 7 entries", 0, lineno)
    return SetupRecord(tokens=tokens, s=s, srv=srv)


def read_dataset(path: str | Path, vocab: Vocabulary | None = None) -> list[SetupRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            records.append(parse_record(line, lineno, vocab))
    return records


def write_dataset(path: str | Path, records: list[SetupRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")
