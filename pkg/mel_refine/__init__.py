from mel_refine.main import main

# Expose important items at package level
__all__ = ['main']
