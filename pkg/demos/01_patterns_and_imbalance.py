"""Walk through the mining layer: parse annotations, count occurrence
patterns, and see how heavy-tailed their frequencies are.

Run: python demos/01_patterns_and_imbalance.py
"""

from aupatterns import base_rates, census, histogram, top_bottom, top_pattern_per_task
from aupatterns.mining import DEFAULT_HISTOGRAM_EDGES
from aupatterns.synth import bp4d_like_spec, generate_table

# A desk-scale stand-in for a real corpus: 20,000 frames whose pattern
# frequencies follow a Zipf-like tail, with "no AU active" on top.
spec = bp4d_like_spec(seed=0)
table = generate_table(spec)
print(f"{len(table)} frames, {len(table.subjects())} subjects, k={table.registry.k} AUs")

rates = base_rates(table)
print("\nPer-AU base rates (fraction of frames active):")
for code, rate in zip(rates.codes, rates.rates):
    bar = "#" * int(rate * 60)
    print(f"  AU{code:<3} {rate:5.3f} {bar}")

cns = census(table)
print(f"\nDistinct patterns: {cns.n_distinct}")
entries, _ = top_bottom(cns, top_n=5, bottom_n=2)
print("Top 5 and bottom 2 patterns by frame count:")
for pattern, count in entries:
    print(f"  {count:6d}  {pattern.to_string()}")

pct = histogram(cns, DEFAULT_HISTOGRAM_EDGES)
print("\nShare of distinct patterns per frame-count range:")
for lo, hi, share in zip(DEFAULT_HISTOGRAM_EDGES, DEFAULT_HISTOGRAM_EDGES[1:], pct):
    print(f"  {lo:>5}-{hi:<5}  {share:5.2f}%")
below50 = sum(pct[:3])
print(f"Patterns occurring fewer than 50 times: {below50:.1f}% of all distinct patterns")

print("\nMost frequent pattern per task:")
for task, (pattern, count) in sorted(top_pattern_per_task(table).items()):
    print(f"  {task}: {pattern.to_string()} ({count} frames)")
