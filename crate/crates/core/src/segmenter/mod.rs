//! Compact per-pixel classifier: descriptors, a two-layer perceptron with
//! analytic gradients, SGD under a one-cycle schedule, and augmentation.

mod augment;
mod descriptor;
mod mlp;
mod optim;
mod train;

pub use augment::{augment, augment_pixels, AugmentConfig, Sample};
pub use descriptor::{
    descriptor_at, featurize, featurize_frame, Descriptor, DescriptorImage, FourierFeatures,
    BASE_DIM, DESCRIPTOR_DIM, FOURIER_DIM,
};
pub use mlp::{
    loss_and_grad, loss_sum_and_grad, predict, predict_labels, ClassifierParams, LabeledPixels,
    LossSum, HIDDEN,
};
pub use optim::{one_cycle_lr, sgd_step, TrainConfig};
pub use train::{pretrain, train_epochs, EpochSampler};
