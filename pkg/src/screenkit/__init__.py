"""Toolkit for curating, annotating and evaluating desktop GUI screenshot datasets.

The package is organised around the stages of a screenshot data pipeline:

- :mod:`screenkit.geometry` -- pixel-space boxes, points and overlap math
- :mod:`screenkit.records` -- annotation record schema and validation
- :mod:`screenkit.store` -- line-delimited on-disk dataset store
- :mod:`screenkit.splits` -- stratified benchmark split construction
- :mod:`screenkit.stats` -- corpus statistics (lengths, types, spatial heatmap)
- :mod:`screenkit.fusion` -- fusing text and icon detector outputs
- :mod:`screenkit.sampling` -- spatially-spread element sampling and mark IDs
- :mod:`screenkit.marking` -- rendering numbered badges onto screenshots
- :mod:`screenkit.captions` -- region caption backends, parsing, validation
- :mod:`screenkit.sourcing` -- three-stage source filtering with human review
- :mod:`screenkit.evalharness` -- grounding / OCR metrics and reports
- :mod:`screenkit.cli` -- command line entry point
- :mod:`screenkit.service` -- HTTP API for the review workflow
"""

__version__ = "0.1.0"
