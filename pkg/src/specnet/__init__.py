"""specnet: spectral classification with from-scratch convolutional networks.

Pipeline stages: survey catalog filtering, stratified redshift sampling,
spectrum rasterization into square 8-bit images, and LeNet-style ConvNet
training and classification.
"""

__version__ = "0.1.0"
