"""Query expansion toolkit: oracle term labeling, a siamese term-quality
classifier over frozen word embeddings, and embedding-based expansion with
classifier-guided reweighting, evaluated under cross-validation."""

__version__ = "0.1.0"
