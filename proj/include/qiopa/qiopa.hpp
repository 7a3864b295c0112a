#pragma once

// Umbrella header: the full simulator surface.

#include "qiopa/bipartite.hpp"
#include "qiopa/errors.hpp"
#include "qiopa/fock.hpp"
#include "qiopa/gain.hpp"
#include "qiopa/io.hpp"
#include "qiopa/macrostates.hpp"
#include "qiopa/measurement.hpp"
#include "qiopa/protocols.hpp"
#include "qiopa/rng.hpp"
#include "qiopa/squeeze.hpp"
#include "qiopa/tap.hpp"
#include "qiopa/version.hpp"
#include "qiopa/wigner.hpp"
