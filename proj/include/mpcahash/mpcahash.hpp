#pragma once

#include "mpcahash/dataset.hpp"
#include "mpcahash/error.hpp"
#include "mpcahash/hashing.hpp"
#include "mpcahash/io.hpp"
#include "mpcahash/mpca.hpp"
#include "mpcahash/pca.hpp"
#include "mpcahash/pipeline.hpp"
#include "mpcahash/random.hpp"
#include "mpcahash/retrieval.hpp"
#include "mpcahash/symmetric_eigen.hpp"
#include "mpcahash/tensor.hpp"
