"""Score normalisation."""


def normalized_score(x: float, random_score: float, target_score: float) -> float:
    """(x - random) / (target - random); random=0, target=1000 gives the divide-by-1000 rule."""
    if target_score == random_score:
        raise ValueError("target_score must differ from random_score")
    return (x - random_score) / (target_score - random_score)
