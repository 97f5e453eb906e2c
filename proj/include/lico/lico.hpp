#ifndef LICO_LICO_HPP_
#define LICO_LICO_HPP_

#include "lico/accounting.hpp"
#include "lico/conv.hpp"
#include "lico/decoder.hpp"
#include "lico/error.hpp"
#include "lico/frontend.hpp"
#include "lico/linearizability.hpp"
#include "lico/linearizer.hpp"
#include "lico/model.hpp"
#include "lico/model_io.hpp"
#include "lico/pipeline.hpp"
#include "lico/quant.hpp"
#include "lico/runtime.hpp"
#include "lico/tensor.hpp"
#include "lico/verify.hpp"
#include "lico/wav.hpp"

#endif  // LICO_LICO_HPP_
