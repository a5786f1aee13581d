#pragma once

// Umbrella header for the IGNet denoising library.

#include "ignet/ablate.hpp"
#include "ignet/autograd.hpp"
#include "ignet/checkpoint.hpp"
#include "ignet/data.hpp"
#include "ignet/errors.hpp"
#include "ignet/image.hpp"
#include "ignet/metrics.hpp"
#include "ignet/model.hpp"
#include "ignet/ops.hpp"
#include "ignet/rng.hpp"
#include "ignet/spectrum.hpp"
#include "ignet/synthetic.hpp"
#include "ignet/tensor.hpp"
#include "ignet/train.hpp"
#include "ignet/wavelet.hpp"
