"""Child-process harness for function calls and generated test utilities.

Usage: python3 runner_shim.py {function|generate|validate} PROGRAM_FILE

Reads exactly one JSON request line on stdin and writes exactly one JSON
response line on stdout. Everything else goes to stderr.
"""

import inspect
import json
import random
import sys
import traceback

_REAL_STDOUT = sys.stdout


def _respond(record):
    _REAL_STDOUT.write(json.dumps(record) + "\n")
    _REAL_STDOUT.flush()


def _load(path):
    with open(path, encoding="utf-8") as fh:
        source = fh.read()
    namespace = {"__name__": "tmp_sol", "__builtins__": __builtins__}
    exec(compile(source, path, "exec"), namespace)
    return source, namespace


def _summary(exc):
    tb = traceback.format_exception(type(exc), exc, exc.__traceback__)
    sys.stderr.write("".join(tb))
    return "%s: %s" % (type(exc).__name__, exc)


def _call_with(fn, args):
    if isinstance(args, dict):
        try:
            inspect.signature(fn).bind(**args)
        except (TypeError, ValueError):
            return fn(*args.values())
        return fn(**args)
    if isinstance(args, list):
        return fn(*args)
    return fn(args)


def do_function(path, req):
    fn_name = req.get("fn_name")
    args = req.get("args", [])
    try:
        source, ns = _load(path)
    except BaseException as exc:  # noqa: BLE001
        return {"ok": False, "result": None, "error": "load failed: " + _summary(exc)}
    holder = ns.get("Solution")
    if "class Solution" in source and holder is not None and hasattr(holder, fn_name or ""):
        try:
            target = holder()
        except BaseException as exc:  # noqa: BLE001
            return {"ok": False, "result": None, "error": _summary(exc)}
    else:
        target = None
    try:
        if target is not None:
            method = getattr(target, fn_name)
        elif fn_name in ns:
            method = ns[fn_name]
        else:
            raise AttributeError("attribute lookup failed: no attribute '%s'" % fn_name)
        result = _call_with(method, args)
    except BaseException as exc:  # noqa: BLE001
        return {"ok": False, "result": None, "error": _summary(exc)}
    try:
        json.dumps(result)
    except (TypeError, ValueError) as exc:
        return {"ok": False, "result": None, "error": "result not JSON serializable: %s" % exc}
    return {"ok": True, "result": result, "error": None}


def do_generate(path, req):
    params = req.get("params")
    if not isinstance(params, list):
        return {"ok": False, "input_string": None, "error": "params must be a list"}
    random.seed(req.get("seed", 0))
    try:
        _, ns = _load(path)
        fn = ns["generate_test_input"]
        n_args = len(inspect.signature(fn).parameters)
        if n_args != len(params):
            raise TypeError("arity mismatch: expected %d params, got %d" % (n_args, len(params)))
        out = fn(*params)
    except BaseException as exc:  # noqa: BLE001
        return {"ok": False, "input_string": None, "error": _summary(exc)}
    if out is None:
        return {"ok": True, "input_string": None}
    if not isinstance(out, str):
        return {"ok": False, "input_string": None, "error": "generator returned %s" % type(out).__name__}
    return {"ok": True, "input_string": out}


def do_validate(path, req):
    text = req.get("input_string")
    if not isinstance(text, str):
        return {"ok": False, "valid": False, "error": "input_string must be a string"}
    try:
        _, ns = _load(path)
        verdict = ns["validate_test_input"](text)
    except BaseException as exc:  # noqa: BLE001
        return {"ok": False, "valid": False, "error": _summary(exc)}
    if not isinstance(verdict, bool):
        return {"ok": False, "valid": False, "error": "validator returned %s" % type(verdict).__name__}
    return {"ok": True, "valid": verdict}


HANDLERS = {"function": do_function, "generate": do_generate, "validate": do_validate}


def main():
    sys.stdout = sys.stderr
    if len(sys.argv) != 3 or sys.argv[1] not in HANDLERS:
        _respond({"ok": False, "error": "usage: runner_shim.py {function|generate|validate} FILE"})
        return
    line = sys.stdin.readline()
    try:
        req = json.loads(line)
        if not isinstance(req, dict):
            raise ValueError("request is not a JSON object")
    except ValueError as exc:
        _respond({"ok": False, "error": "malformed request: %s" % exc})
        return
    _respond(HANDLERS[sys.argv[1]](sys.argv[2], req))


if __name__ == "__main__":
    main()
