"""Key-value metric configuration files.

Schema::

    k0 = 2                       # sphere factor dimension (>= 2)
    f0_profile = cone            # optional: cone (default) | tabulated
    f0_tab_path = f0.csv         # only for tabulated f0

    [component]                  # one block per compact factor
    k = 3
    a = 1.0
    profile = smoothed_cone      # cone is not valid here; see below
    # profile = cosh_collar
    # profile = tabulated
    # tab_path = factor.csv      # CSV with header t,f,fdot,fddot

Factor profiles must satisfy f(0) = a, f'(0) = 0 (smoothed_cone and
cosh_collar take the block's ``a`` as their scale); the sphere profile must
satisfy f(0) = 0, f'(0) = 1.  Comments start with '#'.  Tabulated paths are
resolved relative to the configuration file.
"""

import os

import numpy as np

from .errors import ConfigError
from .noncompact import Component, Cone, CoshCollar, SmoothedCone, Tabulated, WarpedMetric

_TOP_KEYS = {"k0", "f0_profile", "f0_tab_path"}
_COMP_KEYS = {"k", "a", "profile", "tab_path"}


def load_tabulated_csv(path: str) -> Tabulated:
    """Read a `t,f,fdot,fddot` CSV into a tabulated profile."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            if header != "t,f,fdot,fddot":
                raise ConfigError(
                    f"{path}: expected header 't,f,fdot,fddot', got {header!r}"
                )
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read tabulated profile: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed numeric data ({exc})") from exc
    if data.shape[1] != 4:
        raise ConfigError(f"{path}: need 4 columns, got {data.shape[1]}")
    return Tabulated(data[:, 0], data[:, 1], data[:, 2], data[:, 3], path=path)


def _parse_blocks(text: str, source: str):
    top: dict = {}
    blocks: list = []
    current = top
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[component]":
            current = {}
            blocks.append(current)
            continue
        if line.startswith("["):
            raise ConfigError(f"{source}:{ln}: unknown section {line!r}")
        if "=" not in line:
            raise ConfigError(f"{source}:{ln}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        allowed = _TOP_KEYS if current is top else _COMP_KEYS
        if key not in allowed:
            raise ConfigError(f"{source}:{ln}: unknown key {key!r}")
        if key in current:
            raise ConfigError(f"{source}:{ln}: duplicate key {key!r}")
        current[key] = value
    return top, blocks


def _component_from_block(block: dict, base_dir: str, idx: int) -> Component:
    try:
        k = int(block["k"])
        a = float(block["a"])
        kind = block["profile"]
    except KeyError as exc:
        raise ConfigError(f"component {idx}: missing key {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"component {idx}: {exc}") from exc
    if kind == "smoothed_cone":
        profile = SmoothedCone(a)
    elif kind == "cosh_collar":
        profile = CoshCollar(a)
    elif kind == "tabulated":
        if "tab_path" not in block:
            raise ConfigError(f"component {idx}: tabulated profile needs tab_path")
        profile = load_tabulated_csv(os.path.join(base_dir, block["tab_path"]))
    elif kind == "cone":
        raise ConfigError(
            f"component {idx}: the cone profile violates f(0) = a > 0"
        )
    else:
        raise ConfigError(f"component {idx}: unknown profile {kind!r}")
    return Component(k, a, profile)


def parse_metric_config(text: str, base_dir: str = ".", source: str = "<config>") -> WarpedMetric:
    top, blocks = _parse_blocks(text, source)
    if "k0" not in top:
        raise ConfigError(f"{source}: missing required key k0")
    try:
        k0 = int(top["k0"])
    except ValueError as exc:
        raise ConfigError(f"{source}: k0 must be an integer ({exc})") from exc
    f0_kind = top.get("f0_profile", "cone")
    if f0_kind == "cone":
        f0 = Cone()
    elif f0_kind == "tabulated":
        if "f0_tab_path" not in top:
            raise ConfigError(f"{source}: tabulated f0 needs f0_tab_path")
        f0 = load_tabulated_csv(os.path.join(base_dir, top["f0_tab_path"]))
    else:
        raise ConfigError(f"{source}: unknown f0_profile {f0_kind!r}")
    components = tuple(
        _component_from_block(b, base_dir, i) for i, b in enumerate(blocks)
    )
    try:
        return WarpedMetric(k0=k0, components=components, f0=f0)
    except Exception as exc:
        raise ConfigError(f"{source}: invalid metric ({exc})") from exc


def load_metric_config(path: str) -> WarpedMetric:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_metric_config(text, base_dir=os.path.dirname(os.path.abspath(path)), source=path)


def metric_to_config(metric: WarpedMetric) -> str:
    """Serialise a metric back to config text (tabulated paths as given)."""
    lines = [f"k0 = {metric.k0}"]
    d0 = metric.f0.describe()
    if d0["profile"] != "cone":
        lines.append(f"f0_profile = {d0['profile']}")
        if d0.get("tab_path"):
            lines.append(f"f0_tab_path = {d0['tab_path']}")
    for c in metric.components:
        lines.append("")
        lines.append("[component]")
        lines.append(f"k = {c.k}")
        lines.append(f"a = {c.a!r}")
        d = c.profile.describe()
        lines.append(f"profile = {d['profile']}")
        if d.get("tab_path"):
            lines.append(f"tab_path = {d['tab_path']}")
    return "\n".join(lines) + "\n"
