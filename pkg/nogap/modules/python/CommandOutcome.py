from dataclasses import dataclass, field


@dataclass
class CommandOutcome:
    """
    What a command hands back to run(): the rows of results.csv, the extra files it wrote and the number of
    grid points that failed.
    """
    header: tuple
    rows: list
    artifacts: list = field(default_factory=list)
    failures: int = 0
    summary: dict = field(default_factory=dict)
