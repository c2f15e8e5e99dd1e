"""Line-oriented key-value documents: ``key = value`` with # comments.

Used for CLI config files and custom metric definitions.  Values parse as
int, float, comma-separated list, or bare string; keys are case-sensitive.
"""

from .errors import ConfigError


def _parse_scalar(text):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if "," in value:
            out[key] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        else:
            out[key] = _parse_scalar(value)
    return out


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def dump(mapping):
    lines = []
    for key, value in mapping.items():
        if isinstance(value, (list, tuple)):
            rendered = ",".join(f"{v!r}" if isinstance(v, str) else f"{v:.17g}"
                                if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
