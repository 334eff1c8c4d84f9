/*
 * Copyright 2026 The Brushwork Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BRUSHWORK_LOGGING_H_
#define BRUSHWORK_LOGGING_H_

namespace brushwork {

// Sets the spdlog level from BRUSHWORK_LOG (error, warn, info, debug);
// defaults to warn. Logs go to stderr.
void configure_logging();

}  // namespace brushwork

#endif  // BRUSHWORK_LOGGING_H_
