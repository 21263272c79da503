#pragma once

// Everything except the file formats (mnnspec/io.hpp), which pull in the JSON
// library.

#include "mnnspec/core.hpp"
#include "mnnspec/experiments.hpp"
#include "mnnspec/fft_init.hpp"
#include "mnnspec/gradcheck.hpp"
#include "mnnspec/mnn_optimizer.hpp"
#include "mnnspec/order_control.hpp"
#include "mnnspec/pipeline.hpp"
#include "mnnspec/signal_model.hpp"
#include "mnnspec/stat_dist.hpp"
