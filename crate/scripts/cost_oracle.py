#!/usr/bin/env python3
"""Independent cost oracle for the stage table in data/mobilevit_v2.toml.

Re-derives resolved architectures, MACs and parameter counts straight from the
stage table with plain integer arithmetic. The frozen constants in the Rust
test suites were produced by this script:

    python3 scripts/cost_oracle.py 1.0 1.0 1.0 1.0
    python3 scripts/cost_oracle.py 1.1 1.0 0.9 0.9
"""
import json
import math
import sys
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import toml as tomllib
from fractions import Fraction
from pathlib import Path

RES_UNIT = 32
CH_UNIT = 8


def rhu(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def snap(n: int, unit: int) -> int:
    return max(unit, math.floor(Fraction(n, unit) + Fraction(1, 2)) * unit)


def scaled(mult: Fraction, base: int, unit: int) -> int:
    return snap(rhu(mult * base), unit)


def depth(mult: Fraction, base: int) -> int:
    return max(1, rhu(mult * base))


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def conv(size_out, cin, cout, k, groups=1, bias=False, norm=True):
    macs = size_out * size_out * cout * k * k * (cin // groups)
    params = k * k * (cin // groups) * cout + (cout if bias else 0) + (2 * cout if norm else 0)
    return macs, params


def ir_block(size_in, size_out, cin, hidden, cout, k):
    parts = []
    if hidden != cin:
        parts.append(conv(size_in, cin, hidden, 1))
    parts.append(conv(size_out, hidden, hidden, k, groups=hidden))
    parts.append(conv(size_out, hidden, cout, 1))
    return parts


def evaluate(table, r, d_i, d_m, w):
    # factors given as decimal strings, kept exact
    r, d_i, d_m, w = (Fraction(v) for v in (r, d_i, d_m, w))
    res = scaled(r, table["base_resolution"], RES_UNIT)
    size, cin = res, table.get("input_channels", 3)
    layers, resolved = [], []
    for st in table["stages"]:
        kind, k, s = st["kind"], st.get("kernel", 3), st.get("stride", 1)
        if kind == "stem-conv":
            c = scaled(w, st["channels"], CH_UNIT)
            out = ceil_div(size, s)
            layers.append(conv(out, cin, c, k))
            resolved.append(dict(name=st["name"], channels=c, layers=1))
        elif kind == "inverted-residual":
            c = scaled(w, st["channels"], CH_UNIT)
            n = depth(d_i, st["layers"])
            e = Fraction(str(st["expansion"]))
            hidden = []
            out = size
            for i in range(n):
                h = scaled(e, cin, CH_UNIT)
                hidden.append(h)
                out = ceil_div(size, s) if i == 0 else size
                layers.extend(ir_block(size, out, cin, h, c, k))
                size, cin = out, c
            resolved.append(dict(name=st["name"], channels=c, layers=n, expanded=hidden))
            out = size
        elif kind == "mobilevit-block":
            c = scaled(w, st["channels"], CH_UNIT)
            n = depth(d_m, st["layers"])
            d = scaled(w, st["attn_dim"], CH_UNIT)
            f = scaled(Fraction(str(st["ffn_multiplier"])), d, CH_UNIT)
            p = st["patch"]
            hidden = []
            inner = size
            if s > 1:
                h = scaled(Fraction(str(st["expansion"])), cin, CH_UNIT)
                hidden.append(h)
                inner = ceil_div(size, s)
                layers.extend(ir_block(size, inner, cin, h, c, k))
            P = ceil_div(inner, p) * p
            L = P * P
            layers.append(conv(P, c, c, k, groups=c))
            layers.append(conv(P, c, d, 1, norm=False))
            for _ in range(n):
                # qkv (d -> 1 + 2d, bias), context sum, broadcast product, out proj (bias), pre-norm
                layers.append((L * d * (1 + 2 * d) + L * d + L * d + L * d * d,
                               d * (1 + 2 * d) + (1 + 2 * d) + d * d + d + 2 * d))
                layers.append((L * d * f, d * f + f + 2 * d))
                layers.append((L * f * d, f * d + d))
            m, pr = conv(P, d, c, 1)
            layers.append((m, pr + 2 * d))
            resolved.append(dict(name=st["name"], channels=c, layers=n, attn_dim=d, ffn_dim=f,
                                 expanded=hidden, tokens=L))
            out = P
        elif kind == "classifier":
            classes = st["channels"]
            layers.append((cin * classes, cin * classes + classes))
            resolved.append(dict(name=st["name"], channels=classes, layers=1))
            c, out = classes, 1
        else:
            raise ValueError(kind)
        size, cin = out, c
    return dict(
        input_resolution=res,
        stages=resolved,
        macs=sum(m for m, _ in layers),
        params=sum(p for _, p in layers),
        n_layers=len(layers),
    )


def main():
    root = Path(__file__).resolve().parent.parent
    table = tomllib.loads((root / "data" / "mobilevit_v2.toml").read_text())
    args = sys.argv[1:] or ["1.0", "1.0", "1.0", "1.0"]
    print(json.dumps(evaluate(table, *args), indent=1))


if __name__ == "__main__":
    main()
