import importlib
import inspect
import os
import re

import mpclp.cuts

DOC = os.path.join(os.path.dirname(__file__), "..", "docs", "formulation.md")


def _table_symbols():
    text = open(DOC).read()
    section = text.split("## Cross-reference", 1)[1].split("\n## ", 1)[0]
    return set(re.findall(r"`(mpclp\.[\w.]+)`", section))


def _resolve(dotted):
    module, _, attr = dotted.rpartition(".")
    return getattr(importlib.import_module(module), attr)


def test_every_table_symbol_resolves():
    symbols = _table_symbols()
    assert len(symbols) > 20
    for s in symbols:
        _resolve(s)


def test_every_cut_builder_and_separator_is_documented():
    symbols = _table_symbols()
    public = [
        name
        for name, obj in inspect.getmembers(mpclp.cuts, inspect.isfunction)
        if obj.__module__ == "mpclp.cuts" and not name.startswith("_")
    ]
    missing = [n for n in public if f"mpclp.cuts.{n}" not in symbols]
    assert not missing, missing


def test_baseline_variable_counts_documented():
    text = open(DOC).read()
    assert "K|I| + 2|J|" in text and "2|I| + 2|J|" in text
