"""
Services module for the action-tube pipeline.
Temporal maps, heatmap decoding, tube linking, evaluation, simulation and
the benchmark/ablation harnesses.
"""
