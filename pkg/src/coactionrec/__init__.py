"""coactionrec: two-tower multi-interest recommender.

Item tower: co-action graph attention over co-click / co-purchase neighbors.
User tower: per-user sequence graph with pairwise edge features, causal
edge-aware attention, and K-interest pooling. Retrieval scores an item by
the best of its K inner products.
"""

__version__ = "0.1.0"
