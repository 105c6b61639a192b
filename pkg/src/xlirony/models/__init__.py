"""Classifier families: random forest over feature vectors and a CNN over embeddings."""
