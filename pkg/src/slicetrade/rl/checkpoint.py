"""Line-oriented checkpoint text format.

::

    slicetrade-checkpoint 1
    net actor sizes 3 128 128 1 out tanh hidden relu
    param actor W0 3 128
    <hex floats, one row per line>
    ...

Floats are written with ``float.hex`` so a save/load/save cycle is byte-identical.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mlp import Mlp

HEADER = "slicetrade-checkpoint 1"


def dumps(nets: dict) -> str:
    lines = [HEADER]
    for name in sorted(nets):
        net = nets[name]
        lines.append(f"net {name} sizes {' '.join(map(str, net.sizes))} "
                     f"out {net.out_act} hidden {net.hidden_act}")
        for pname, p in zip(net.param_names(), net.params):
            arr = np.atleast_2d(p)
            lines.append(f"param {name} {pname} {' '.join(map(str, p.shape))}")
            for row in arr:
                lines.append(" ".join(float(x).hex() for x in row))
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0] != HEADER:
        raise ValueError("not a slicetrade checkpoint (bad header)")
    nets, i = {}, 1
    while i < len(lines):
        tok = lines[i].split()
        if tok[0] == "net":
            name = tok[1]
            k = tok.index("out")
            sizes = [int(x) for x in tok[3:k]]
            net = Mlp(sizes, out_act=tok[k + 1], hidden_act=tok[k + 3],
                      rng=np.random.default_rng(0))
            nets[name] = net
            i += 1
        elif tok[0] == "param":
            name, pname = tok[1], tok[2]
            shape = tuple(int(x) for x in tok[3:])
            nrows = shape[0] if len(shape) == 2 else 1
            rows = [[float.fromhex(x) for x in lines[i + 1 + r].split()] for r in range(nrows)]
            arr = np.array(rows).reshape(shape)
            target = dict(zip(nets[name].param_names(), nets[name].params))[pname]
            if target.shape != arr.shape:
                raise ValueError(f"{name}.{pname}: shape {arr.shape} != {target.shape}")
            target[...] = arr
            i += 1 + nrows
        else:
            raise ValueError(f"line {i + 1}: unexpected record {tok[0]!r}")
    return nets


def save(path, nets: dict) -> None:
    Path(path).write_text(dumps(nets))


def load(path) -> dict:
    return loads(Path(path).read_text())
