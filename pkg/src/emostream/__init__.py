"""emostream: music emotion decoding from audio onto the valence/arousal circumplex."""

__version__ = "0.1.0"
