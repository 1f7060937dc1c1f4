import logging
from concurrent.futures import ThreadPoolExecutor

log = logging.getLogger(__name__)


def list_get(index, default, l):
    try:
        a = l[index]
    except IndexError:
        a = default
    return a


def get_positivity(string):
    if isinstance(string, bool):  # oi!
        return string
    lowered = string.lower()
    if lowered in ('yes', 'y', 'true', 't', '1', 'enable', 'on'):
        return True
    elif lowered in ('no', 'n', 'false', 'f', '0', 'disable', 'off'):
        return False
    else:
        return None


def parallel_map(func, items, threads: int = 1):
    """
    Maps a function over items on a thread pool.
    Results come back in input order, so any reduction over them is deterministic.

    :param func: The function to apply.
    :param items: An iterable of inputs.
    :param threads: The worker count. 1 runs inline.
    :return: A list of results.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))


def fmt_float(value, digits=4):
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def format_table(headers, rows):
    """
    Renders rows as an aligned plain-text table. Numbers are right-aligned, everything else left-aligned.

    :param headers: A list of column names.
    :param rows: A list of lists of cells.
    :rtype: str
    """
    cells = [[str(h) for h in headers]] + [[c if isinstance(c, str) else fmt_float(c) if isinstance(c, float)
                                            else str(c) for c in row] for row in rows]
    numeric = [all(not isinstance(row[i], str) for row in rows) if rows else False for i in range(len(headers))]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]

    def render(row):
        return "  ".join(c.rjust(w) if num else c.ljust(w) for c, w, num in zip(row, widths, numeric)).rstrip()

    out = [render(cells[0]), "  ".join("-" * w for w in widths)]
    out.extend(render(r) for r in cells[1:])
    return "\n".join(out)
