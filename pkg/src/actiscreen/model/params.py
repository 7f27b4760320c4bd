"""Gradient-boosting hyperparameters and their search space."""

import math
from dataclasses import asdict, dataclass

# name -> (low, high, kind); kind is "int", "log" or "real"
SEARCH_SPACE = {
    "n_estimators": (300, 1100, "int"),
    "max_depth": (6, 12, "int"),
    "min_child_weight": (1.0, 15.0, "log"),
    "learning_rate": (0.02, 0.12, "log"),
    "subsample": (0.55, 0.95, "real"),
    "top_k_feats": (5, 35, "int"),
}
FIXED = {"colsample_bytree": 0.5, "colsample_bylevel": 0.3, "reg_alpha": 0.0, "reg_lambda": 1.0}


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int = 600
    max_depth: int = 6
    min_child_weight: float = 1.0
    learning_rate: float = 0.05
    subsample: float = 0.8
    colsample_bytree: float = 0.5
    colsample_bylevel: float = 0.3
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    top_k_feats: int = 20

    def validate(self, space=SEARCH_SPACE):
        """Raise ValueError if any searched value lies outside ``space``."""
        for name, (lo, hi, _) in space.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")
        if self.reg_alpha != 0.0:
            raise ValueError("only reg_alpha = 0 is supported")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (int(v) if isinstance(getattr(cls, k, None), int) else v) for k, v in d.items()})


def from_unit(u, space=SEARCH_SPACE, **overrides):
    """Map a point of the unit cube (ordered as ``space``) to hyperparameters."""
    vals = {}
    for ui, (name, (lo, hi, kind)) in zip(u, space.items()):
        ui = min(max(float(ui), 0.0), 1.0)
        if kind == "int":
            vals[name] = min(hi, int(math.floor(lo + ui * (hi - lo + 1))))
        elif kind == "log":
            vals[name] = math.exp(math.log(lo) + ui * (math.log(hi) - math.log(lo)))
        else:
            vals[name] = lo + ui * (hi - lo)
    vals.update(overrides)
    return HyperParams(**vals)


def to_unit(hp, space=SEARCH_SPACE):
    out = []
    for name, (lo, hi, kind) in space.items():
        v = getattr(hp, name)
        if kind == "int":
            out.append((v - lo + 0.5) / (hi - lo + 1))
        elif kind == "log":
            out.append((math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo)))
        else:
            out.append((v - lo) / (hi - lo))
    return out
