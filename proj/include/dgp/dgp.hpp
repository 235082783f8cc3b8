#pragma once

#include "dgp/error.hpp"
#include "dgp/sparse.hpp"
#include "dgp/taxonomy.hpp"
#include "dgp/propagation.hpp"
#include "dgp/training.hpp"
#include "dgp/zeroshot.hpp"
#include "dgp/data.hpp"
#include "dgp/gradcheck.hpp"
