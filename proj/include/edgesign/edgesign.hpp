#pragma once

#include "edgesign/augment.hpp"
#include "edgesign/checkpoint.hpp"
#include "edgesign/contrastive.hpp"
#include "edgesign/encoder.hpp"
#include "edgesign/graph.hpp"
#include "edgesign/metrics.hpp"
#include "edgesign/optim.hpp"
#include "edgesign/pca.hpp"
#include "edgesign/predictor.hpp"
#include "edgesign/semantics.hpp"
#include "edgesign/synth.hpp"
#include "edgesign/tensor.hpp"
#include "edgesign/train.hpp"
#include "edgesign/wordvec.hpp"
