import os, shlex

# Turn a pevolve argument list into a map.
#  --name value    -> { 'name': 'value' }
#  --name          -> { 'name': True } (also when followed by another option)
#  -j 4            -> { mappings['j']: '4' } (only the last letter of a group takes a value)
#  -sj 4           -> { 'silent': True, 'threads': '4' }
#  train a.csv     -> { defaultArgKey: [ 'train', 'a.csv' ] }
# Names in [strictlyFlags] never take a value, so in [ --silent train ]
# 'train' stays positional. With [excludeFilename], args[0] (the program
# name) is skipped. A later value for the same name replaces an earlier one.
def parseArgs(args,
        mappings = { 'h': 'help' },
        defaultArgKey = 'default',
        excludeFilename = True,
        strictlyFlags = { 'help' }):
    result = { defaultArgKey: [] }
    letters = []
    pending = None # Option name waiting for its value.

    if excludeFilename:
        args = args[1:]

    def closePending():
        if pending:
            result[pending] = True
        return None

    for chunk in args:
        if len(chunk) == 0:
            continue

        if chunk.startswith("--") and len(chunk) > 2:
            closePending()
            pending = chunk[2:]
        elif chunk.startswith("-") and len(chunk) > 1:
            pending = closePending()
            letters.extend(chunk[1:])

            last = chunk[-1]
            if last in mappings:
                pending = mappings[last]
        elif pending:
            result[pending] = chunk
            pending = None
        else:
            result[defaultArgKey].append(chunk)

        if pending and pending in strictlyFlags:
            pending = closePending()

    closePending()

    # Letters that didn't take a value are flags.
    for letter in letters:
        if letter in mappings and not mappings[letter] in result:
            result[mappings[letter]] = True

    return result

# Merge options from the environment variable [envVariable] (parsed with
# [mappings], shell quoting allowed) into [argList], returning a new map.
# Options already in [argList] win.
def fillArgsFromEnv(argList, envVariable, mappings, strictlyFlags={ 'help' }, defaultArgKey='default', environ=None):
    if environ is None:
        environ = os.environ

    if not envVariable in environ:
        return argList

    envArgList = shlex.split(environ[envVariable])
    argsFromEnv = parseArgs(envArgList, mappings, defaultArgKey, excludeFilename = False, strictlyFlags = strictlyFlags)

    result = {}

    for key in argsFromEnv:
        if key != defaultArgKey:
            result[key] = argsFromEnv[key]

    for key in argList:
        if key != defaultArgKey:
            result[key] = argList[key]

    # Positional words only come from the real command line: the subcommand
    # and its operands shouldn't be injected from the environment.
    result[defaultArgKey] = list(argList.get(defaultArgKey, []))

    return result

# Fill [argMap] with entries of [fileValues] that it doesn't already have.
# Used for --config files, whose keys are flag names.
def fillArgsFromMap(argMap, fileValues):
    result = dict(argMap)

    for key in fileValues:
        if not key in result:
            value = fileValues[key]

            # Flags given as JSON booleans are present (True) or absent.
            if value is False:
                continue
            result[key] = value if value is True else str(value)

    return result
