#!/usr/bin/env node
// Regenerates the contract bundles under fixtures/bundles from fixtures/contracts.
// Requires the `solc` npm package (0.8.24): `npm install solc@0.8.24`, then
// `NODE_PATH=<dir>/node_modules node fixtures/build_fixtures.js`.
const fs = require('fs');
const path = require('path');
const solc = require('solc');

const here = __dirname;
const targets = [
  { file: 'erc20.sol', contract: 'FixtureToken', address: '0x00000000000000000000000000000000000e2c20', optimizer: false },
  { file: 'erc20.sol', contract: 'FixtureToken', address: '0x00000000000000000000000000000000000e2c21', optimizer: false },
  { file: 'erc20.sol', contract: 'FixtureToken', address: '0x00000000000000000000000000000000000e2c2f', optimizer: true },
  { file: 'nft.sol', contract: 'FixtureCollection', address: '0x00000000000000000000000000000000000e0721', optimizer: false },
  { file: 'fallback_only.sol', contract: 'FixtureFallback', address: '0x00000000000000000000000000000000000fa11b', optimizer: false },
  { file: 'registry.sol', contract: 'FixtureRegistry', address: '0x00000000000000000000000000000000000ae915', optimizer: false },
  { file: 'registry.sol', contract: 'FixtureRegistry', address: '0x00000000000000000000000000000000000ae91f', optimizer: true },
  { file: 'staking.sol', contract: 'FixtureStaking', address: '0x000000000000000000000000000000000005a4e0', optimizer: false },
];

const truth = [];
for (const t of targets) {
  const source = fs.readFileSync(path.join(here, 'contracts', t.file), 'utf8');
  const input = {
    language: 'Solidity',
    sources: { [t.file]: { content: source } },
    settings: {
      evmVersion: 'shanghai',
      optimizer: { enabled: t.optimizer, runs: 200 },
      outputSelection: { '*': { '*': ['evm.deployedBytecode.object', 'evm.methodIdentifiers'] } },
    },
  };
  const out = JSON.parse(solc.compile(JSON.stringify(input)));
  const errors = (out.errors || []).filter((e) => e.severity === 'error');
  if (errors.length) {
    throw new Error(errors.map((e) => e.formattedMessage).join('\n'));
  }
  const c = out.contracts[t.file][t.contract];
  const dir = path.join(here, 'bundles', t.address);
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, 'source.sol'), source);
  fs.writeFileSync(path.join(dir, 'runtime.hex'), '0x' + c.evm.deployedBytecode.object + '\n');
  const version = 'v' + solc.version().replace('.Emscripten.clang', '');
  fs.writeFileSync(
    path.join(dir, 'meta.json'),
    JSON.stringify({ compiler_version: version, optimizer: { enabled: t.optimizer, runs: 200 } }, null, 2) + '\n',
  );
  truth.push({
    address: t.address,
    file: t.file,
    contract: t.contract,
    optimizer: t.optimizer,
    selectors: c.evm.methodIdentifiers,
  });
}
fs.writeFileSync(path.join(here, 'ground_truth.json'), JSON.stringify(truth, null, 2) + '\n');
