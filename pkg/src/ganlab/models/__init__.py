from .autoencoder import ConvAutoencoderDiscriminator, MLPAutoencoderDiscriminator, reconstruction_energy
from .base import (
    Discriminator,
    DiscriminatorOutput,
    Generator,
    NoiseSpec,
    conditional_inputs,
    sample_labels,
    sample_noise,
)
from .dcgan import DCGANDiscriminator, DCGANGenerator
from .layers import (
    MinibatchDiscrimination,
    SpectralNorm,
    SpectralState,
    minibatch_discrimination,
    spectral_normalize,
)
from .mlp import MLPDiscriminator, MLPGenerator

ARCHITECTURES = {
    "dcgan_generator": DCGANGenerator,
    "dcgan_discriminator": DCGANDiscriminator,
    "mlp_generator": MLPGenerator,
    "mlp_discriminator": MLPDiscriminator,
    "conv_autoencoder_discriminator": ConvAutoencoderDiscriminator,
    "mlp_autoencoder_discriminator": MLPAutoencoderDiscriminator,
}

__all__ = [
    "ARCHITECTURES",
    "ConvAutoencoderDiscriminator",
    "DCGANDiscriminator",
    "DCGANGenerator",
    "Discriminator",
    "DiscriminatorOutput",
    "Generator",
    "MLPAutoencoderDiscriminator",
    "MLPDiscriminator",
    "MLPGenerator",
    "MinibatchDiscrimination",
    "NoiseSpec",
    "SpectralNorm",
    "SpectralState",
    "conditional_inputs",
    "minibatch_discrimination",
    "reconstruction_energy",
    "sample_labels",
    "sample_noise",
    "spectral_normalize",
]
