"""Scalar rough-path numerics: fractional Brownian drivers, controlled
paths and sewing, flows with mollified discontinuous drifts, the
local-time functional, weak transport solutions, and the permanent-style
moment combinatorics behind the estimates."""

__version__ = "0.1.0"
