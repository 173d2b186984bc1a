from typing import Any, List, Optional, Sequence


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], title: Optional[str] = None) -> str:
    """Format rows in a clean box-drawn table."""
    if not rows:
        return "No rows to display."

    cells = [[_cell(value) for value in row] for row in rows]
    col_widths = [len(str(header)) for header in headers]
    for row in cells:
        for i, value in enumerate(row):
            col_widths[i] = max(col_widths[i], len(value))

    # Create table header
    header_row = "┌" + "┬".join("─" * (width + 2) for width in col_widths) + "┐"
    header_text = "│"
    for i, header in enumerate(headers):
        header_text += f" {str(header):<{col_widths[i]}} │"

    separator = "├" + "┼".join("─" * (width + 2) for width in col_widths) + "┤"

    body = []
    for row in cells:
        line = "│"
        for i, value in enumerate(row):
            # Numbers right-aligned, text left-aligned
            align = ">" if _is_number(value) else "<"
            line += f" {value:{align}{col_widths[i]}} │"
        body.append(line)

    footer = "└" + "┴".join("─" * (width + 2) for width in col_widths) + "┘"

    table = [header_row, header_text, separator] + body + [footer]
    if title:
        table.insert(0, title)
    return "\n".join(table)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "✅ pass" if value else "❌ fail"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def _is_number(text: str) -> bool:
    try:
        float(text.split(" ")[0])
        return True
    except ValueError:
        return False


def format_mean_sd(mean: float, sd: float, digits: int = 2) -> str:
    """Render ``mean ± sd``."""
    return f"{mean:.{digits}f} ± {sd:.{digits}f}"


# ANSI color codes for terminal output
class Colors:
    RESET = "\033[0m"
    BOLD = "\033[1m"
    UNDERLINE = "\033[4m"

    # Foreground colors
    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    BLUE = "\033[34m"
    CYAN = "\033[36m"
    WHITE = "\033[37m"

    # Background colors
    BG_RED = "\033[41m"
    BG_GREEN = "\033[42m"
    BG_BLUE = "\033[44m"


def paint(text: str, *styles: str, enabled: bool = True) -> str:
    """Wrap ``text`` in ANSI styles when colors are enabled."""
    if not enabled or not styles:
        return text
    return "".join(styles) + text + Colors.RESET


def banner(title: str, enabled: bool = True) -> List[str]:
    """Framed heading used by the CLI for stage summaries."""
    top = paint(f"╔══ {title} " + "═" * max(0, 56 - len(title)), Colors.BG_BLUE, Colors.WHITE, Colors.BOLD, enabled=enabled)
    bottom = paint("╚" + "═" * 60, Colors.BG_BLUE, Colors.WHITE, Colors.BOLD, enabled=enabled)
    return [top, bottom]
