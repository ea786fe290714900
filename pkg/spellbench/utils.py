# Shared plumbing: package settings, exceptions, and UTF-8 line I/O.
import json
import os


# mutable singleton for stashing process-wide settings
settings = {}


def _threads_from_env(value):
    try:
        threads = int(value)
    except (TypeError, ValueError):
        return 1
    return max(threads, 1)


# At import time, grab settings from env if possible. User can always override.
settings['threads'] = _threads_from_env(os.environ.get('SPELLBENCH_THREADS'))


class SpellbenchException(Exception):
    # All exceptions raised directly by this package inherit from this.
    ...


class DecodeError(SpellbenchException, ValueError):
    "Input bytes are not valid UTF-8."

    def __init__(self, offset, path=None, reason=''):
        self.offset = offset
        self.path = path
        where = f'{path}: ' if path else ''
        super().__init__(f'{where}invalid UTF-8 at byte offset {offset}'
                         f'{": " + reason if reason else ""}')


class FormatError(SpellbenchException):
    "Input is malformed or parallel inputs do not line up."

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class NoErrorSignal(SpellbenchException):
    ...


class ModelError(SpellbenchException):
    ...


class ConsistencyError(SpellbenchException):
    ...


def decode(raw, offset=0, path=None):
    """
    Decode UTF-8 bytes, reporting failures by absolute byte offset.

    Parameters
    ----------
    raw : bytes
    offset : int
        byte offset of ``raw`` within its file
    path : string, optional
        used only in the error message
    """
    try:
        return raw.decode('utf-8')
    except UnicodeDecodeError as exc:
        raise DecodeError(offset + exc.start, path, exc.reason) from exc


def iter_raw_lines(path):
    """
    Yield ``(line_number, byte_offset, raw_bytes)`` for each line of a file.

    Line endings are kept so that callers can write lines back unchanged.
    """
    offset = 0
    with open(path, 'rb') as f:
        for number, raw in enumerate(f, start=1):
            yield number, offset, raw
            offset += len(raw)


def iter_lines(path):
    "Yield ``(line_number, text)`` with line endings stripped."
    for number, offset, raw in iter_raw_lines(path):
        text = decode(raw, offset, path)
        yield number, text.rstrip('\r\n')


def split_line_ending(line):
    "Split a line into its body and its (possibly empty) line ending."
    body = line.rstrip('\r\n')
    return body, line[len(body):]


def count_lines(path):
    with open(path, 'rb') as f:
        return sum(1 for _ in f)


def write_json(obj, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write('\n')


def read_json(path):
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        return json.loads(decode(raw, 0, path))
    except json.JSONDecodeError as exc:
        raise FormatError(f'{path}: not valid JSON ({exc.msg})',
                          line=exc.lineno) from exc
