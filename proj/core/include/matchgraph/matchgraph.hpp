#pragma once

#include "matchgraph/embeddings.hpp"
#include "matchgraph/error.hpp"
#include "matchgraph/evaluation.hpp"
#include "matchgraph/gcn.hpp"
#include "matchgraph/knn_index.hpp"
#include "matchgraph/parallel.hpp"
#include "matchgraph/random.hpp"
#include "matchgraph/retrieval.hpp"
#include "matchgraph/subgraph.hpp"
#include "matchgraph/synthetic.hpp"
#include "matchgraph/trainer.hpp"
