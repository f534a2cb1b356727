from typing import Iterable, List, Optional, TypeVar

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    ProgressColumn,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)

ProgressType = TypeVar("ProgressType")

# rich allows one live display at a time, so nested loops run without a bar
_depth = 0


def track(
    sequence: Iterable[ProgressType],
    description: str = "Working...",
    total: Optional[float] = None,
    console: Optional[Console] = None,
    transient: bool = True,
    disable: bool = False,
) -> Iterable[ProgressType]:
    """Iterate over ``sequence`` behind a rich progress bar.

    Used for episode loops, training epochs and fixture sweeps. The bar is
    transient by default so that log lines written through RichHandler stay
    readable once the loop finishes.

    Args:
        sequence: Values to iterate over.
        description: Text shown next to the bar.
        total: Number of steps, defaults to ``len(sequence)``.
        console: Console to draw on, a fresh one by default.
        transient: Clear the bar when the loop ends.
        disable: Iterate without drawing anything.
    """
    global _depth

    columns: List[ProgressColumn] = (
        [TextColumn("[progress.description]{task.description}")] if description else []
    )
    columns.extend(
        (
            BarColumn(),
            MofNCompleteColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
        )
    )
    console = console or Console()
    progress = Progress(
        *columns,
        console=console,
        transient=transient,
        disable=disable or _depth > 0 or not console.is_terminal,
    )

    _depth += 1
    try:
        with progress:
            yield from progress.track(sequence, total=total, description=description)
    finally:
        _depth -= 1
