"""Shared test configurations."""
from ambdg.config import ExperimentConfig


def small_cfg(**changes) -> ExperimentConfig:
    base = ExperimentConfig(
        scheme="ambdg",
        n=4,
        d=20,
        T_p=2.5,
        T_c=10.0,
        b=60,
        lam=2 / 3,
        xi=1.0,
        root_seed=11,
        L=2.0,
        horizon_updates=30,
    )
    return base.with_(**changes)


# criterion number -> (passed, detail), filled in by the acceptance tests
ACCEPTANCE: dict = {}


def report(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
