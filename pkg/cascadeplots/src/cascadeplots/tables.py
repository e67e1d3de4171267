"""Reader for the simulator's CSV file format.

Files carry ``# key=value`` comment lines before the header, then a single
header row and float rows. Parsing keeps the float64 values exactly as
written (round-trip formatting on the producer side makes ``float(cell)``
reproduce the original doubles), so figures plot the file contents verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Table:
    path: Path
    meta: dict[str, str]
    names: tuple[str, ...]
    columns: dict[str, np.ndarray]

    @property
    def n_rows(self) -> int:
        return 0 if not self.names else self.columns[self.names[0]].size

    def column(self, name: str) -> np.ndarray:
        """A named column; unknown names raise and list what is available."""
        if name not in self.columns:
            have = ", ".join(self.names)
            raise KeyError(f"column {name!r} not in {self.path.name} (has: {have})")
        return self.columns[name]

    def require(self, *names: str) -> None:
        for name in names:
            self.column(name)


def parse_table(path: str | Path) -> Table:
    path = Path(path)
    meta: dict[str, str] = {}
    names: tuple[str, ...] | None = None
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, sep, value = token.partition("=")
                    if sep:
                        meta.setdefault(key, value)
                continue
            if names is None:
                names = tuple(line.split(","))
                continue
            cells = line.split(",")
            if len(cells) != len(names):
                raise ValueError(
                    f"{path.name}: row has {len(cells)} cells, header has {len(names)}"
                )
            rows.append([float(c) for c in cells])
    if names is None:
        raise ValueError(f"{path.name}: no header row found")
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    columns = {name: data[:, j].copy() for j, name in enumerate(names)}
    return Table(path=path, meta=meta, names=names, columns=columns)
