/**
 * P6DF v1 decoder: the little-endian columnar wire format the service streams.
 *
 * Layout (all integers little-endian):
 *
 *     magic      4 bytes  "P6DF"
 *     version    u8       currently 1
 *     col_count  u32
 *     per column:
 *         name_len   u16, then UTF-8 name bytes
 *         dtype      u8   0=float64  1=int64  2=categorical
 *         row_count  u64
 *         has_nulls  u8
 *         [null bitset, ceil(rows/8) bytes, LSB-first, bit 1 = value present]
 *         payload:
 *             float64/int64: row_count * 8 bytes
 *             categorical:   dict_size u32,
 *                            dict_size entries of (u16 len + UTF-8),
 *                            row_count * u32 codes
 *
 * The decoder is strict: wrong magic, unknown version, short payloads, and
 * trailing bytes are all errors, matching the server-side codec.
 */

export class BadMagic extends Error {}
export class UnsupportedVersion extends Error {}
export class TruncatedPayload extends Error {}

export type DType = "float64" | "int64" | "categorical";

export interface Column {
  name: string;
  dtype: DType;
  /** Raw storage: f64 values, i64 values, or u32 dictionary codes. */
  values: Float64Array | BigInt64Array | Uint32Array;
  /** Per-row presence, 1 = value present; null when no row is null. */
  valid: Uint8Array | null;
  /** Code -> label table for categorical columns, null otherwise. */
  dictionary: string[] | null;
}

export interface Table {
  columns: Column[];
  rowCount: number;
}

const MAGIC = [0x50, 0x36, 0x44, 0x46]; // "P6DF"
const VERSION = 1;
const DTYPES: DType[] = ["float64", "int64", "categorical"];

class Reader {
  private pos = 0;
  private view: DataView;

  constructor(private data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  private need(n: number): number {
    if (this.pos + n > this.data.length) {
      throw new TruncatedPayload(
        `needed ${n} bytes at offset ${this.pos}, have ${this.data.length - this.pos}`,
      );
    }
    const at = this.pos;
    this.pos += n;
    return at;
  }

  u8(): number {
    return this.view.getUint8(this.need(1));
  }

  u16(): number {
    return this.view.getUint16(this.need(2), true);
  }

  u32(): number {
    return this.view.getUint32(this.need(4), true);
  }

  u64(): number {
    const big = this.view.getBigUint64(this.need(8), true);
    if (big > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new TruncatedPayload(`row count ${big} exceeds what this client addresses`);
    }
    return Number(big);
  }

  bytes(n: number): Uint8Array {
    const at = this.need(n);
    // slice() copies, so typed-array views over the result are 8-byte aligned
    return this.data.slice(at, at + n);
  }

  utf8(n: number): string {
    return new TextDecoder("utf-8").decode(this.bytes(n));
  }

  get offset(): number {
    return this.pos;
  }

  get remaining(): number {
    return this.data.length - this.pos;
  }
}

function readBitset(reader: Reader, rows: number): Uint8Array {
  const packed = reader.bytes(Math.ceil(rows / 8));
  const valid = new Uint8Array(rows);
  for (let i = 0; i < rows; i++) {
    valid[i] = (packed[i >> 3] >> (i & 7)) & 1;
  }
  return valid;
}

export function decodeFrame(data: Uint8Array): Table {
  const reader = new Reader(data);
  const magic = reader.bytes(4);
  for (let i = 0; i < 4; i++) {
    if (magic[i] !== MAGIC[i]) {
      throw new BadMagic("not a P6DF payload");
    }
  }
  const version = reader.u8();
  if (version !== VERSION) {
    throw new UnsupportedVersion(`P6DF version ${version} not supported (max ${VERSION})`);
  }
  const colCount = reader.u32();
  const columns: Column[] = [];
  let rowCount = 0;
  for (let c = 0; c < colCount; c++) {
    const name = reader.utf8(reader.u16());
    const dtypeCode = reader.u8();
    const rows = reader.u64();
    const hasNulls = reader.u8();
    if (dtypeCode >= DTYPES.length) {
      throw new TruncatedPayload(`unknown dtype code ${dtypeCode}`);
    }
    const dtype = DTYPES[dtypeCode];
    const valid = hasNulls ? readBitset(reader, rows) : null;
    if (dtype === "categorical") {
      const dictSize = reader.u32();
      const dictionary: string[] = [];
      for (let d = 0; d < dictSize; d++) {
        dictionary.push(reader.utf8(reader.u16()));
      }
      const codes = new Uint32Array(reader.bytes(rows * 4).buffer);
      columns.push({ name, dtype, values: codes, valid, dictionary });
    } else if (dtype === "float64") {
      const values = new Float64Array(reader.bytes(rows * 8).buffer);
      columns.push({ name, dtype, values, valid, dictionary: null });
    } else {
      const values = new BigInt64Array(reader.bytes(rows * 8).buffer);
      columns.push({ name, dtype, values, valid, dictionary: null });
    }
    rowCount = rows;
  }
  if (reader.remaining !== 0) {
    throw new TruncatedPayload(`${reader.remaining} trailing bytes after frame`);
  }
  return { columns, rowCount: columns.length ? rowCount : 0 };
}

export function columnByName(table: Table, name: string): Column | null {
  for (const col of table.columns) {
    if (col.name === name) {
      return col;
    }
  }
  return null;
}

/**
 * Rendering value of one cell: nulls come back as null, categorical codes as
 * their dictionary label, int64 as a JS number (views never need more than
 * 53 bits of a category count or cluster id).
 */
export function cellValue(col: Column, row: number): number | string | null {
  if (col.valid !== null && col.valid[row] === 0) {
    return null;
  }
  if (col.dtype === "categorical") {
    return (col.dictionary as string[])[(col.values as Uint32Array)[row]];
  }
  if (col.dtype === "int64") {
    return Number((col.values as BigInt64Array)[row]);
  }
  return (col.values as Float64Array)[row];
}

/** Exact cell for equality checks: int64 stays a bigint, no rounding. */
export function exactCellValue(col: Column, row: number): number | string | bigint | null {
  if (col.valid !== null && col.valid[row] === 0) {
    return null;
  }
  if (col.dtype === "categorical") {
    return (col.dictionary as string[])[(col.values as Uint32Array)[row]];
  }
  if (col.dtype === "int64") {
    return (col.values as BigInt64Array)[row];
  }
  return (col.values as Float64Array)[row];
}
