"""Hierarchical item ranking for collaborative filtering.

Items are ranked per user by the stationary distribution of a random walk
that mixes direct item-item associations (co-occurrence and adjusted
cosine), block-level proximity from item metadata, and teleportation back
to the user's own ratings.
"""
__version__ = "0.1.0"
