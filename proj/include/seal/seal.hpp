#pragma once

#include "seal/alloc.hpp"
#include "seal/canonical_json.hpp"
#include "seal/dataset_io.hpp"
#include "seal/error.hpp"
#include "seal/experiment.hpp"
#include "seal/graph.hpp"
#include "seal/info_oracle.hpp"
#include "seal/mi.hpp"
#include "seal/nets.hpp"
#include "seal/optim.hpp"
#include "seal/rng.hpp"
#include "seal/svg_plot.hpp"
#include "seal/synthgen.hpp"
#include "seal/tensor.hpp"
#include "seal/trainer.hpp"
