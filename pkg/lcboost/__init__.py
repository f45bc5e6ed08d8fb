"""
lcboost: solve long-context tasks with a short working window.

A decision loop reads a long document chunk by chunk, choosing per chunk
whether to extract evidence, merge it into a running summary or skip it,
and answers from the accumulated evidence. Every prompt fits the window.
"""

__version__ = '0.1.0'
