"""Patient-level decision from nightly probabilities."""

from dataclasses import dataclass

import numpy as np

from .errors import NoNights


@dataclass(frozen=True)
class PatientPrediction:
    patient_id: str
    night_probs: tuple
    mean_prob: float
    majority_fraction: float
    decision_mean: bool
    decision_vote: bool

    @property
    def final(self):
        return self.decision_mean or self.decision_vote

    @property
    def score(self):
        return self.mean_prob

    def to_dict(self):
        return {
            "id": self.patient_id,
            "score": self.mean_prob,
            "final": self.final,
            "decision_mean": self.decision_mean,
            "decision_vote": self.decision_vote,
            "majority_fraction": self.majority_fraction,
            "night_probs": list(self.night_probs),
        }


def aggregate_patient(night_probs, night_threshold, patient_threshold, patient_id=""):
    """Positive when the mean probability exceeds ``patient_threshold`` or more than
    half of the nights exceed ``night_threshold``."""
    p = np.asarray(night_probs, dtype=np.float64)
    if p.size == 0:
        raise NoNights(f"patient {patient_id!r} has no nights")
    mean = float(p.mean())
    frac = float(np.count_nonzero(p > night_threshold)) / p.size
    return PatientPrediction(str(patient_id), tuple(float(v) for v in p), mean, frac,
                             mean > patient_threshold, frac > 0.5)


def aggregate_patients(probs, groups, night_threshold, patient_threshold):
    """One PatientPrediction per distinct group, in sorted group order."""
    probs = np.asarray(probs, dtype=np.float64)
    groups = np.asarray(groups)
    return [
        aggregate_patient(probs[groups == g], night_threshold, patient_threshold, g)
        for g in np.unique(groups)
    ]
