"""Sum-of-exponentials kernel approximation and fast convolution toolkit."""

__version__ = "0.1.0"
