"""Evaluate, classify, and mechanically repair LLM-generated Python completions.

The package is organized as a small library plus a CLI:

- :mod:`fixeval.corpus` loads benchmark tasks and model completions.
- :mod:`fixeval.sandbox` supervises isolated execution of assembled programs
  over a JSON wire protocol (live runner process or recorded transcript).
- :mod:`fixeval.classifier` maps failures onto a fixed error-type taxonomy
  and attributes causes with fixability flags.
- :mod:`fixeval.pyscan` is the tolerant lexical scanner the repair steps rely on.
- :mod:`fixeval.fixer` implements the three-step repair pipeline
  (filter, truncate, insert missing imports).
- :mod:`fixeval.stats` provides pass@k, summaries, Pearson, Wilcoxon, and OLS.
- :mod:`fixeval.cli` wires everything into ``evaluate``, ``fix``, ``report``,
  and ``stats`` subcommands.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
