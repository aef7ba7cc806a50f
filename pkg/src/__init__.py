# make src a package

