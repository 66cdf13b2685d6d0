"""
Benchmark harness: problem presets, run/sweep specifications, exporters and
the `ahflow` command line.
"""
