export { containerHash, writeContainer, FORMAT_VERSION, ALIGNMENT } from './container.js';
export type { ContainerConfig, NamedTensor } from './container.js';
export { exportCheckpoint, ShapeInconsistencyError } from './exportCheckpoint.js';
export type { ExportManifest, MappedTensorRecord } from './exportCheckpoint.js';
export { exportSamples, DEFAULT_NUM_SAMPLES, DEFAULT_SEQ_LEN } from './exportSamples.js';
export { UnmappableArchitectureError, loadMappingTables } from './mapping.js';
export { SafetensorsFile, buildSafetensors, halfToFloat } from './safetensors.js';
export { WordPieceTokenizer } from './tokenizer.js';
export { writeTokenBatch } from './tokenBatch.js';
