import math
import numpy as np
import pandas as pd
from typing import Dict, Any, List, Optional, Tuple
from scipy.stats import norm
import logging

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95

TALLY_COLUMNS = ['n', 'type', 'count', 'freq', 'theory', 'ci_lo', 'ci_hi']


def wilson_interval(count: int, total: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        count: Number of successes
        total: Number of trials
        confidence: Two-sided confidence level

    Returns:
        (lower, upper) bounds of the interval
    """
    if total <= 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2)
    phat = count / total
    denom = 1 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def wilson_sigma(count: int, total: int) -> float:
    """Width of one standard deviation implied by the 95% Wilson interval."""
    lo, hi = wilson_interval(count, total)
    return (hi - lo) / (2 * norm.ppf(0.5 + CONFIDENCE / 2))


def z_score(count: int, total: int, expected: float) -> float:
    """
    Binomial z-score of an observed count against a predicted probability.

    Returns 0 when the prediction is degenerate (0 or 1) and matches exactly.
    """
    if total <= 0:
        return 0.0
    variance = expected * (1 - expected) / total
    diff = count / total - expected
    if variance <= 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / math.sqrt(variance)


def total_variation(observed: Dict[str, float], predicted: Dict[str, float]) -> float:
    """Half the l1 distance between two distributions over the union of their keys."""
    keys = set(observed) | set(predicted)
    return 0.5 * math.fsum(abs(observed.get(key, 0.0) - predicted.get(key, 0.0)) for key in keys)


def mean_and_stderr(values: List[float]) -> Tuple[float, float]:
    """Sample mean and its standard error."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def tally_dataframe(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """
    Convert tally rows to the CSV projection used by plotting tools.

    Args:
        rows: Tally rows with at least the TALLY_COLUMNS keys

    Returns:
        DataFrame with one row per (n, type)
    """
    if not rows:
        return pd.DataFrame(columns=TALLY_COLUMNS)
    df = pd.DataFrame(rows)
    for column in TALLY_COLUMNS:
        if column not in df.columns:
            df[column] = np.nan
    return df[TALLY_COLUMNS]


def theory_dataframe(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Theory rows with per-factor Hom/Ext lists flattened to strings."""
    if not rows:
        return pd.DataFrame(columns=['type', 'probability'])
    df = pd.DataFrame(rows)
    for column in ('hom', 'ext'):
        if column in df.columns:
            df[column] = df[column].apply(lambda values: ";".join(str(v) for v in values))
    return df


def comparison_dataframe(tally_rows: List[Dict[str, Any]], theory_rows: List[Dict[str, Any]],
                         samples: Dict[int, int]) -> pd.DataFrame:
    """
    Join tally rows with theory rows on the type label.

    Rows are sorted by (n, type) so the result does not depend on input order.
    """
    tally = tally_dataframe(tally_rows).drop(columns=['theory'])
    theory = pd.DataFrame(theory_rows, columns=['type', 'probability']) if theory_rows else \
        pd.DataFrame(columns=['type', 'probability'])
    merged = tally.merge(theory.rename(columns={'probability': 'theory'}), on='type', how='left')
    merged['z'] = [
        z_score(int(row['count']), samples[int(row['n'])], float(row['theory']))
        if pd.notna(row['theory']) else np.nan
        for _, row in merged.iterrows()
    ]
    return merged.sort_values(['n', 'type']).reset_index(drop=True)


def format_probability(value: Optional[float], digits: int = 10) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    return f"{value:.{digits}f}"
