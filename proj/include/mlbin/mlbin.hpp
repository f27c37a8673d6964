#pragma once

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/calibration.hpp"
#include "mlbin/config.hpp"
#include "mlbin/cost_model.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/explorer.hpp"
#include "mlbin/kernels.hpp"
#include "mlbin/lstm.hpp"
#include "mlbin/model_io.hpp"
#include "mlbin/quantization.hpp"
#include "mlbin/readout.hpp"
#include "mlbin/tensor.hpp"
