"""Shared model builders for the test suite."""

from __future__ import annotations

import numpy as np

from commcascade import (DegreeDistribution, GlobalSeeding, LinearThreshold,
                         ModelSpec)
from commcascade.dist import DegreeSequences


def poisson_model(l1, l2, lm, seeding=None, n1=1000, n2=1000, theta=0.25):
    return ModelSpec(
        p1=DegreeDistribution.poisson(l1),
        p2=DegreeDistribution.poisson(l2),
        pm=DegreeDistribution.poisson(lm),
        n1=n1, n2=n2,
        threshold=LinearThreshold(theta),
        seeding=seeding if seeding is not None else GlobalSeeding(0.05),
    )


def explicit_sequences(internal1, internal2, cross1, cross2) -> DegreeSequences:
    seqs = DegreeSequences(
        internal1=np.asarray(internal1, dtype=np.int64),
        internal2=np.asarray(internal2, dtype=np.int64),
        cross1=np.asarray(cross1, dtype=np.int64),
        cross2=np.asarray(cross2, dtype=np.int64),
    )
    seqs.check()
    return seqs


def model_for_sequences(seqs: DegreeSequences, threshold, seeding) -> ModelSpec:
    """A ModelSpec whose sizes fit explicit sequences (distributions unused
    by the simulator once sequences are fixed)."""
    return ModelSpec(
        p1=DegreeDistribution.regular(1), p2=DegreeDistribution.regular(1),
        pm=DegreeDistribution.regular(1),
        n1=len(seqs.internal1), n2=len(seqs.internal2),
        threshold=threshold, seeding=seeding,
    )
