"""Raw-audio VAE toolkit for latent-space sound morphing.

Submodules:
    audio       WAV I/O, fixed-length clip handling, dataset construction
    features    MFCC extraction, dynamic time warping, k-means clustering
    models      dilated and strided 1-D convolutional VAEs with a bottleneck classifier
    training    three-term alternating-gradient training loop and checkpoints
    evaluation  1-NN latent accuracy, MFCC-DTW deviation reports, 2-D projection
    morphing    latent-path decoding into audio
    service     HTTP API serving the latent explorer
    cli         command-line entry points
"""

__version__ = "0.1.0"
