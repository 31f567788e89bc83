use super::{ArchitectureDescriptor, LayerSpec, NetworkError};

/// How spatial support is accumulated through the layer chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SupportRule {
    /// Standard composition: every windowed layer (convolution or pooling)
    /// widens the support by `(window − 1) · pitch`, and every stride
    /// multiplies the pitch.
    Exact,
    /// Kernel-only growth: the first windowed layer contributes its full
    /// window, later convolutions add `pitch · (n − 1)` and pooling windows
    /// add nothing. The pitch is the cumulative stride in front of the second
    /// convolution and stays fixed from there on. This is the accounting that
    /// yields supports 11, 43, 59, 75, 91 on the reference network.
    #[default]
    Nominal,
}

/// Side length, in input pixels, of the region that influences one output
/// location of layer `layer` (1-based).
pub fn receptive_field(
    descriptor: &ArchitectureDescriptor,
    layer: usize,
    rule: SupportRule,
) -> Result<usize, NetworkError> {
    let spec = descriptor.layer(layer)?;
    if spec.is_dense() {
        return Err(NetworkError::NotSpatial {
            layer,
            kind: spec.kind_name(),
        });
    }
    let layers = &descriptor.layers[..layer];
    Ok(match rule {
        SupportRule::Exact => exact(layers),
        SupportRule::Nominal => nominal(layers),
    })
}

fn window_and_stride(spec: &LayerSpec) -> (usize, usize) {
    match *spec {
        LayerSpec::Conv { kernel, stride, .. } => (kernel, stride),
        LayerSpec::MaxPool { size, stride } => (size, stride),
        _ => (1, 1),
    }
}

fn exact(layers: &[LayerSpec]) -> usize {
    let mut support = 1;
    let mut pitch = 1;
    for spec in layers {
        let (window, stride) = window_and_stride(spec);
        support += (window - 1) * pitch;
        pitch *= stride;
    }
    support
}

fn nominal(layers: &[LayerSpec]) -> usize {
    let mut support = 1;
    let mut pitch = 1;
    let mut seen_window = false;
    let mut frozen = false;
    for spec in layers {
        let (window, stride) = window_and_stride(spec);
        match spec {
            LayerSpec::Conv { .. } if seen_window => {
                frozen = true;
                support += pitch * (window - 1);
            }
            LayerSpec::Conv { .. } | LayerSpec::MaxPool { .. } if !seen_window => {
                support = window;
                seen_window = true;
            }
            _ => {}
        }
        if !frozen {
            pitch *= stride;
        }
    }
    support
}
