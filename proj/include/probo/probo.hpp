#pragma once

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/hash.hpp"
#include "probo/ledger.hpp"
#include "probo/reputation.hpp"
#include "probo/scenario.hpp"
#include "probo/simnet.hpp"
#include "probo/studies.hpp"
#include "probo/tokenomics.hpp"
#include "probo/types.hpp"
#include "probo/verification.hpp"
