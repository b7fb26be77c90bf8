# This Source Code Form is subject to terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.

"""Unit tests for logging functionality."""

from __future__ import annotations

import sys
import json
import logging as logthings

from dickebattery import __version__
from dickebattery.logger import (
    LOG,
    RunContextFilter,
    SimpleJsonFormatter,
    RepeatedWarningFilter,
    run_context,
    current_run_context,
)


def make_record(msg: str = "Test message", level: int = logthings.INFO, **extra):
    record = logthings.LogRecord(
        name="dickebattery.harness",
        level=level,
        pathname="test.py",
        lineno=1,
        msg=msg,
        args=(),
        exc_info=extra.pop("exc_info", None),
    )
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestSimpleJsonFormatter:
    """Test the JSON formatter."""

    def test_basic_json_format(self):
        """Test basic JSON formatting."""
        parsed = json.loads(SimpleJsonFormatter().format(make_record()))
        assert parsed["message"] == "Test message"
        assert parsed["levelname"] == "INFO"
        assert parsed["name"] == "dickebattery"

    def test_version_in_json(self):
        """Test version is included for INFO and the development commit is not."""
        parsed = json.loads(SimpleJsonFormatter().format(make_record()))
        assert parsed["dickebattery.version"] == __version__
        assert "dickebattery.git_commit" not in parsed

    def test_no_version_for_warnings(self):
        """Test version info is only added to INFO records."""
        record = make_record(level=logthings.WARNING)
        assert "dickebattery.version" not in json.loads(
            SimpleJsonFormatter().format(record)
        )

    def test_run_context_field(self):
        """Test the run context is emitted as a nested object."""
        record = make_record(run={"n_tls": 4, "g_tau": 1.5})
        parsed = json.loads(SimpleJsonFormatter().format(record))
        assert parsed["run"] == {"n_tls": 4, "g_tau": 1.5}

    def test_exception(self):
        """Test exceptions are formatted into the record."""
        try:
            raise ValueError("boom")
        except ValueError:
            record = make_record(exc_info=sys.exc_info())
        parsed = json.loads(SimpleJsonFormatter().format(record))
        assert "ValueError: boom" in parsed["exception"]


class TestRunContext:
    """Test run context propagation."""

    def test_filter_adds_context(self):
        """Test records inside a run context carry its fields."""
        record = make_record()
        with run_context(experiment="rl", n_tls=2):
            RunContextFilter().filter(record)
        assert record.run == {"experiment": "rl", "n_tls": 2}

    def test_nested_contexts_merge(self):
        """Test inner contexts extend and then restore the outer one."""
        with run_context(experiment="rl", n_tls=2):
            with run_context(repetition=3):
                assert current_run_context() == {
                    "experiment": "rl",
                    "n_tls": 2,
                    "repetition": 3,
                }
            assert current_run_context() == {"experiment": "rl", "n_tls": 2}
        assert current_run_context() == {}

    def test_no_context(self):
        """Test records outside any context get an empty run field."""
        record = make_record()
        assert RunContextFilter().filter(record)
        assert record.run == {}


class TestRepeatedWarningFilter:
    """Test demotion of repeated warnings."""

    def test_first_warning_kept(self):
        """Test the first occurrence keeps its level."""
        record = make_record("Norm drift %.3e", logthings.WARNING)
        assert RepeatedWarningFilter().filter(record)
        assert record.levelname == "WARNING"

    def test_repeat_demoted(self):
        """Test a repeated message becomes DEBUG."""
        warnings = RepeatedWarningFilter()
        warnings.filter(make_record("Norm drift %.3e", logthings.WARNING))
        repeat = make_record("Norm drift %.3e", logthings.WARNING)
        kept = warnings.filter(repeat)
        assert repeat.levelno == logthings.DEBUG
        assert repeat.levelname == "DEBUG"
        assert kept == LOG.isEnabledFor(logthings.DEBUG)

    def test_other_levels_untouched(self):
        """Test INFO and ERROR records always pass."""
        warnings = RepeatedWarningFilter()
        for _ in range(2):
            assert warnings.filter(make_record("same", logthings.ERROR))
            assert warnings.filter(make_record("same", logthings.INFO))

    def test_reset(self):
        """Test reset forgets seen messages."""
        warnings = RepeatedWarningFilter()
        warnings.filter(make_record("again", logthings.WARNING))
        warnings.reset()
        record = make_record("again", logthings.WARNING)
        warnings.filter(record)
        assert record.levelname == "WARNING"


class TestLogger:
    """Test the package logger."""

    def test_logger_setup(self):
        """Test the package logger is isolated and filtered."""
        assert LOG.name == "dickebattery"
        assert not LOG.propagate
        assert any(isinstance(f, RunContextFilter) for f in LOG.filters)
        assert any(isinstance(f, RepeatedWarningFilter) for f in LOG.filters)
        formatters = [handler.formatter for handler in LOG.handlers]
        assert any(isinstance(f, SimpleJsonFormatter) for f in formatters)
