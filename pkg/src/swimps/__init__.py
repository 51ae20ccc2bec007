"""swimps: a software-testable smart water irrigation platform.

Simulated sensor/pump/solar devices run a hysteresis irrigation loop
against a soil-water model, speak a compact binary frame protocol to an
ingestion gateway with an append-only timeline, debounced low-moisture
alerts and a control API, plus a Likert survey scorer and report
rendering for run artifacts.
"""

__version__ = "0.1.0"
