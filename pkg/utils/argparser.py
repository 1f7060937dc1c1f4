import collections
import shlex

from utils.functions import list_get
from zsl.models.errors import InvalidArgument


def argsplit(args: str):
    """Splits a string into shell-style words."""
    try:
        return shlex.split(args.strip())
    except ValueError as e:
        raise InvalidArgument(f"Could not split arguments: {e}")


def argparse(args, splitter=argsplit):
    """
    Parses arguments.

    :param args: A list of arguments to parse.
    :type args: str or Iterable
    :return: The parsed arguments.
    :rtype: :class:`~utils.argparser.ParsedArguments`
    """
    if isinstance(args, str):
        args = splitter(args)

    parsed = collections.defaultdict(lambda: [])
    index = 0
    for a in args:
        if a.startswith('-') and not _is_number(a):
            parsed[a.lstrip('-')].append(list_get(index + 1, True, args))
        else:
            parsed[a].append(True)
        index += 1
    return ParsedArguments(parsed)


def _is_number(value):
    try:
        float(value)
    except ValueError:
        return False
    return True


class ParsedArguments:
    def __init__(self, parsed):
        self._parsed = parsed

    def get(self, arg, default=None, type_=str):
        """
        Gets a list of all values of an argument.

        :param str arg: The name of the arg to get.
        :param default: The default value to return if the arg is not found. Not cast to type.
        :param type_: The type that each value in the list should be returned as.
        :return: The relevant argument list.
        :rtype: list
        """
        if default is None:
            default = []
        parsed = self._parsed[arg]
        if not parsed:
            return default
        try:
            return [type_(v) for v in parsed]
        except (ValueError, TypeError):
            raise InvalidArgument(f"One or more arguments cannot be cast to {type_.__name__} (in `{arg}`)")

    def get_list(self, arg, default=None, type_=str):
        """
        Like get(), but also splits comma-separated values, so ``-k 1,2 -k 3`` gives [1, 2, 3].
        """
        values = []
        for v in self.get(arg, default=[], type_=str):
            values.extend(p.strip() for p in str(v).split(',') if p.strip())
        if not values:
            return default if default is not None else []
        try:
            return [type_(v) for v in values]
        except (ValueError, TypeError):
            raise InvalidArgument(f"One or more arguments cannot be cast to {type_.__name__} (in `{arg}`)")

    def __contains__(self, item):
        return item in self._parsed and bool(self._parsed[item])

    def __repr__(self):
        return f"<ParsedArguments parsed={dict(self._parsed)}>"
